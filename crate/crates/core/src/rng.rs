//! Seedable, splittable random streams.
//!
//! A run is driven by a single 64-bit seed. Independent sub-streams (one per
//! chain, language, replication block, ...) are addressed by a path of
//! integers; the ChaCha8 key of a sub-stream is derived by folding the path
//! into the seed with SplitMix64. Streams are therefore reproducible no
//! matter which thread or in which order they are created.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Identifier recorded in output metadata.
pub const RNG_ALGORITHM: &str = "ChaCha8 (rand_chacha 0.9), SplitMix64 path-derived keys";

pub type StreamRng = ChaCha8Rng;

#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Root of a tree of independent random streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngStreams {
    seed: u64,
}

impl RngStreams {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// A child root; `streams.split(a).stream(&[b])` equals `streams.stream(&[a, b])`.
    pub fn split(&self, index: u64) -> RngStreams {
        let mut state = self.seed;
        let a = splitmix64(&mut state);
        let mut state = a ^ index.wrapping_mul(0xD6E8_FEB8_6659_FD93);
        RngStreams {
            seed: splitmix64(&mut state),
        }
    }

    /// Generator for the sub-stream addressed by `path`.
    pub fn stream(&self, path: &[u64]) -> StreamRng {
        let root = path.iter().fold(*self, |acc, &i| acc.split(i));
        let mut state = root.seed;
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        ChaCha8Rng::from_seed(key)
    }
}
