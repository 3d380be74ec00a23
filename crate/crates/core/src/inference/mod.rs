//! Multi-chain MCMC over an unconstrained log-density.
//!
//! Two kernels share one driver: an adaptive random-walk Metropolis sampler
//! (per-coordinate scales plus a Robbins–Monro global scale) and a
//! multinomial No-U-Turn sampler with dual-averaged step size and a diagonal
//! metric estimated in Stan-style warmup windows. Chains run in parallel on
//! the current rayon pool; chain `c` draws from stream `[c]` of the seed.

mod chains;
pub mod diagnostics;
mod nuts;
mod rwm;

use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{RngStreams, StreamRng, RNG_ALGORITHM};

pub use chains::{quantile_sorted, ChainSet, ChainStats, ConvergenceGate, GateVerdict, ParamSummary, RunMetadata};
pub use diagnostics::{ess, r_hat};

/// A log-density on `R^dim`, up to an additive constant.
///
/// Implementations must be pure: chains evaluate it concurrently.
pub trait LogDensity: Sync {
    fn dim(&self) -> usize;

    fn log_density(&self, x: &[f64]) -> f64;

    /// Log-density and its gradient (written into `grad`), when available.
    fn log_density_and_grad(&self, x: &[f64], grad: &mut [f64]) -> Option<f64> {
        let _ = (x, grad);
        None
    }

    fn has_gradient(&self) -> bool {
        false
    }
}

impl<L: LogDensity + ?Sized> LogDensity for &L {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn log_density(&self, x: &[f64]) -> f64 {
        (**self).log_density(x)
    }
    fn log_density_and_grad(&self, x: &[f64], grad: &mut [f64]) -> Option<f64> {
        (**self).log_density_and_grad(x, grad)
    }
    fn has_gradient(&self) -> bool {
        (**self).has_gradient()
    }
}

/// Adapts a closure (and optionally its gradient) to [`LogDensity`].
pub struct FnDensity<F, G = fn(&[f64], &mut [f64]) -> f64> {
    dim: usize,
    f: F,
    grad: Option<G>,
}

impl<F> FnDensity<F>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f, grad: None }
    }
}

impl<F, G> FnDensity<F, G>
where
    F: Fn(&[f64]) -> f64 + Sync,
    G: Fn(&[f64], &mut [f64]) -> f64 + Sync,
{
    /// `grad` returns the log-density and fills the gradient.
    pub fn with_gradient(dim: usize, f: F, grad: G) -> Self {
        Self {
            dim,
            f,
            grad: Some(grad),
        }
    }
}

impl<F, G> LogDensity for FnDensity<F, G>
where
    F: Fn(&[f64]) -> f64 + Sync,
    G: Fn(&[f64], &mut [f64]) -> f64 + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn log_density(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
    fn log_density_and_grad(&self, x: &[f64], grad: &mut [f64]) -> Option<f64> {
        self.grad.as_ref().map(|g| g(x, grad))
    }
    fn has_gradient(&self) -> bool {
        self.grad.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Adaptive random-walk Metropolis.
    #[default]
    RandomWalk,
    /// No-U-Turn Hamiltonian sampler; needs gradients.
    Nuts,
}

impl Algorithm {
    pub fn default_target_acceptance(self) -> f64 {
        match self {
            Algorithm::RandomWalk => 0.234,
            Algorithm::Nuts => 0.8,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::RandomWalk => "adaptive_random_walk_metropolis",
            Algorithm::Nuts => "nuts_diag_dual_averaging",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rwm" | "random_walk" | "random-walk" => Ok(Algorithm::RandomWalk),
            "nuts" | "hmc" => Ok(Algorithm::Nuts),
            other => Err(Error::Validation(format!("unknown algorithm {other:?} (expected rwm|nuts)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub n_chains: usize,
    pub n_warmup: usize,
    pub n_samples: usize,
    pub seed: u64,
    /// `None` picks the algorithm's default (0.234 random walk, 0.8 NUTS).
    pub target_acceptance: Option<f64>,
    pub algorithm: Algorithm,
    pub max_tree_depth: usize,
    /// Half-width of the uniform jitter applied to the initial point per chain.
    pub init_jitter: f64,
    /// Consecutive fully rejected warmup iterations that abort a chain.
    pub stuck_window: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            n_chains: 4,
            n_warmup: 1000,
            n_samples: 1000,
            seed: 0,
            target_acceptance: None,
            algorithm: Algorithm::default(),
            max_tree_depth: 10,
            init_jitter: 0.1,
            stuck_window: 250,
        }
    }
}

impl SamplerConfig {
    pub fn target(&self) -> f64 {
        self.target_acceptance
            .unwrap_or_else(|| self.algorithm.default_target_acceptance())
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_chains == 0 || self.n_warmup == 0 || self.n_samples == 0 {
            return Err(Error::Validation("n_chains, n_warmup and n_samples must be >= 1".into()));
        }
        let t = self.target();
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::Validation(format!("target_acceptance must lie in (0, 1), got {t}")));
        }
        if self.max_tree_depth == 0 || self.stuck_window == 0 {
            return Err(Error::Validation("max_tree_depth and stuck_window must be >= 1".into()));
        }
        if !(self.init_jitter >= 0.0) {
            return Err(Error::Validation("init_jitter must be non-negative".into()));
        }
        Ok(())
    }
}

/// Output of one chain before assembly.
pub(crate) struct ChainRun {
    pub draws: Vec<f64>,
    pub stats: ChainStats,
}

/// Run `config.n_chains` chains from (jittered copies of) `init`.
///
/// Only post-warmup draws are returned; adaptation is frozen after warmup.
/// Output is bit-identical for identical `(target, init, config)`.
pub fn run_mcmc<L: LogDensity + ?Sized>(target: &L, init: &[f64], config: &SamplerConfig) -> Result<ChainSet> {
    config.validate()?;
    let dim = target.dim();
    if dim == 0 {
        return Err(Error::Structural("log density has dimension 0".into()));
    }
    if init.len() != dim {
        return Err(Error::Structural(format!(
            "initial point has length {}, density dimension is {dim}",
            init.len()
        )));
    }
    if config.algorithm == Algorithm::Nuts && !target.has_gradient() {
        return Err(Error::Structural("NUTS requires a gradient".into()));
    }
    let streams = RngStreams::new(config.seed);
    let runs: Vec<ChainRun> = (0..config.n_chains)
        .into_par_iter()
        .map(|chain| {
            let mut rng = streams.stream(&[chain as u64]);
            let start = jittered_start(target, init, config.init_jitter, chain, &mut rng)?;
            let began = Instant::now();
            let mut run = match config.algorithm {
                Algorithm::RandomWalk => rwm::run_chain(target, start, config, chain, &mut rng)?,
                Algorithm::Nuts => nuts::run_chain(target, start, config, chain, &mut rng)?,
            };
            run.stats.duration_secs = began.elapsed().as_secs_f64();
            Ok(run)
        })
        .collect::<Result<_>>()?;

    let metadata = RunMetadata {
        seed: config.seed,
        algorithm: config.algorithm.name().to_string(),
        rng: RNG_ALGORITHM.to_string(),
        n_chains: config.n_chains,
        n_warmup: config.n_warmup,
        n_samples: config.n_samples,
        target_acceptance: config.target(),
    };
    let names = (0..dim).map(|i| format!("x[{i}]")).collect();
    let (draws, stats) = runs.into_iter().map(|r| (r.draws, r.stats)).unzip();
    ChainSet::from_chains(names, draws, stats, metadata)
}

fn jittered_start<L: LogDensity + ?Sized>(
    target: &L,
    init: &[f64],
    jitter: f64,
    chain: usize,
    rng: &mut StreamRng,
) -> Result<Vec<f64>> {
    let start: Vec<f64> = init
        .iter()
        .map(|&v| if jitter > 0.0 { v + rng.random_range(-jitter..=jitter) } else { v })
        .collect();
    let lp = target.log_density(&start);
    if lp.is_nan() {
        return Err(Error::Initialization(format!("chain {chain}: log density is NaN at the initial point")));
    }
    if !lp.is_finite() {
        return Err(Error::Initialization(format!(
            "chain {chain}: log density is {lp} at the initial point"
        )));
    }
    Ok(start)
}

/// Running mean/variance (Welford).
#[derive(Debug, Clone)]
pub(crate) struct Welford {
    n: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Welford {
    pub fn new(dim: usize) -> Self {
        Self {
            n: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    pub fn push(&mut self, x: &[f64]) {
        self.n += 1;
        let n = self.n as f64;
        for ((m, s), &v) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(x) {
            let d = v - *m;
            *m += d / n;
            *s += d * (v - *m);
        }
    }

    pub fn count(&self) -> usize {
        self.n
    }

    /// Variance shrunk towards `1e-3` as in Stan's diagonal metric estimate.
    pub fn regularized_variance(&self) -> Vec<f64> {
        let n = self.n as f64;
        self.m2
            .iter()
            .map(|&s| {
                let var = if self.n > 1 { s / (n - 1.0) } else { 1.0 };
                (n / (n + 5.0)) * var + 1e-3 * (5.0 / (n + 5.0))
            })
            .collect()
    }

    pub fn reset(&mut self) {
        self.n = 0;
        self.mean.iter_mut().for_each(|v| *v = 0.0);
        self.m2.iter_mut().for_each(|v| *v = 0.0);
    }
}

/// Stan's warmup schedule: a fast initial buffer, doubling slow windows in
/// which the metric is estimated, and a fast terminal buffer.
#[derive(Debug, Clone)]
pub(crate) struct WarmupSchedule {
    window_ends: Vec<usize>,
    init_buffer: usize,
    slow_end: usize,
}

impl WarmupSchedule {
    pub fn new(n_warmup: usize) -> Self {
        let (mut init, mut term, mut base) = (75usize, 50usize, 25usize);
        if n_warmup < 20 {
            return Self {
                window_ends: Vec::new(),
                init_buffer: n_warmup,
                slow_end: n_warmup,
            };
        }
        if init + term + base > n_warmup {
            init = (0.15 * n_warmup as f64) as usize;
            term = (0.1 * n_warmup as f64) as usize;
            base = n_warmup - init - term;
        }
        let slow_end = n_warmup - term;
        let mut ends = Vec::new();
        let mut start = init;
        let mut size = base;
        while start < slow_end {
            let mut end = start + size;
            // absorb a final window that would be shorter than the next one
            if end + 2 * size > slow_end {
                end = slow_end;
            }
            ends.push(end);
            start = end;
            size *= 2;
        }
        Self {
            window_ends: ends,
            init_buffer: init,
            slow_end,
        }
    }

    /// Whether iteration `t` (0-based) contributes to the metric estimate.
    pub fn in_slow_window(&self, t: usize) -> bool {
        t >= self.init_buffer && t < self.slow_end
    }

    /// Whether a slow window closes after iteration `t`.
    pub fn window_closes(&self, t: usize) -> bool {
        self.window_ends.contains(&(t + 1))
    }
}
