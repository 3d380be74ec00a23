//! Exit-code classification, run manifests and file helpers.

use std::fmt;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Context;
use serde::Serialize;

pub const EXIT_INPUT: i32 = 2;
pub const EXIT_CONVERGENCE: i32 = 3;
pub const EXIT_INTERNAL: i32 = 4;

/// Errors with a fixed exit code.
#[derive(Debug)]
pub enum Failure {
    Input(String),
    Convergence(String),
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Input(m) => write!(f, "{m}"),
            Failure::Convergence(m) => write!(f, "convergence gate failed: {m}"),
        }
    }
}

impl std::error::Error for Failure {}

pub fn input_error(msg: impl Into<String>) -> anyhow::Error {
    Failure::Input(msg.into()).into()
}

pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if let Some(f) = cause.downcast_ref::<Failure>() {
            return match f {
                Failure::Input(_) => EXIT_INPUT,
                Failure::Convergence(_) => EXIT_CONVERGENCE,
            };
        }
        if let Some(e) = cause.downcast_ref::<tqa_core::Error>() {
            use tqa_core::Error as E;
            return match e {
                E::Domain(_) | E::InsufficientData(_) | E::Validation(_) | E::Structural(_) | E::Csv(_) | E::Json(_) => {
                    EXIT_INPUT
                }
                _ => EXIT_INTERNAL,
            };
        }
    }
    EXIT_INTERNAL
}

/// Load an input file, mapping any failure to an input error.
pub fn read_input<T>(path: &Path, what: &str, f: impl FnOnce(&Path) -> tqa_core::Result<T>) -> anyhow::Result<T> {
    f(path).map_err(|e| input_error(format!("cannot read {what} {}: {e}", path.display())))
}

#[derive(Debug, Serialize)]
pub struct Timing {
    pub started_unix: u64,
    pub finished_unix: u64,
}

/// Provenance of one command's output directory.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: &'static str,
    pub seed: u64,
    pub config: serde_json::Value,
    pub inputs: Vec<String>,
    /// Paths relative to the output directory.
    pub outputs: Vec<String>,
    pub warnings: Vec<String>,
    pub timing: Timing,
}

pub fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// Collects the files a command writes below its output directory.
pub struct OutDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutDir {
    pub fn create(root: &Path) -> anyhow::Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Absolute path for `rel`, recorded as an output; parent dirs are created.
    pub fn path(&mut self, rel: &str) -> anyhow::Result<PathBuf> {
        let p = self.root.join(rel);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        self.written.push(rel.to_string());
        Ok(p)
    }

    pub fn writer(&mut self, rel: &str) -> anyhow::Result<BufWriter<File>> {
        let p = self.path(rel)?;
        Ok(BufWriter::new(File::create(&p).with_context(|| format!("creating {}", p.display()))?))
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> anyhow::Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_text(rel, &text)
    }

    pub fn write_text(&mut self, rel: &str, text: &str) -> anyhow::Result<()> {
        let p = self.path(rel)?;
        fs::write(&p, text).with_context(|| format!("writing {}", p.display()))
    }

    pub fn record(&mut self, rel: &str) {
        self.written.push(rel.to_string());
    }

    pub fn finish(mut self, mut manifest: RunManifest) -> anyhow::Result<()> {
        self.written.sort();
        self.written.dedup();
        manifest.outputs = std::mem::take(&mut self.written);
        manifest.timing.finished_unix = unix_now();
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        let p = self.root.join("manifest.json");
        fs::write(&p, text).with_context(|| format!("writing {}", p.display()))
    }
}

/// Stable 64-bit FNV-1a hash, used to derive per-language seeds from names.
pub fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

/// Reject characters that would escape the output directory.
pub fn safe_component(name: &str) -> anyhow::Result<&str> {
    if name.is_empty() || name.contains(['/', '\\']) || name == "." || name == ".." {
        return Err(input_error(format!("language name {name:?} cannot be used as a directory name")));
    }
    Ok(name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes() {
        assert_eq!(exit_code(&input_error("x")), EXIT_INPUT);
        assert_eq!(exit_code(&Failure::Convergence("x".into()).into()), EXIT_CONVERGENCE);
        let e: anyhow::Error = tqa_core::Error::Validation("v".into()).into();
        assert_eq!(exit_code(&e.context("while loading")), EXIT_INPUT);
        assert_eq!(exit_code(&anyhow::anyhow!("boom")), EXIT_INTERNAL);
    }

    #[test]
    fn fnv_is_stable() {
        assert_eq!(fnv1a(""), 0xcbf2_9ce4_8422_2325);
        assert_ne!(fnv1a("en-de"), fnv1a("en-fr"));
    }
}
