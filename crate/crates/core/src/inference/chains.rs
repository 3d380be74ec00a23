use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::diagnostics::{ess, r_hat};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainStats {
    /// Mean Metropolis acceptance probability over the post-warmup draws.
    pub acceptance_rate: f64,
    /// Final global proposal scale (random walk) or leapfrog step size (NUTS).
    pub step_size: f64,
    pub n_divergent: usize,
    pub mean_tree_depth: f64,
    pub n_gradient_evals: usize,
    pub duration_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub seed: u64,
    pub algorithm: String,
    pub rng: String,
    pub n_chains: usize,
    pub n_warmup: usize,
    pub n_samples: usize,
    pub target_acceptance: f64,
}

/// Posterior draws indexed by (chain, iteration, parameter).
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSet {
    names: Vec<String>,
    n_draws: usize,
    /// One row-major `n_draws × dim` block per chain.
    chains: Vec<Vec<f64>>,
    pub stats: Vec<ChainStats>,
    pub metadata: RunMetadata,
}

/// Per-parameter posterior summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub q2_5: f64,
    pub q50: f64,
    pub q97_5: f64,
    /// `None` when undefined (single chain, constant draws).
    pub r_hat: Option<f64>,
    pub ess: Option<f64>,
}

/// Acceptance rule for a fit: max R-hat and min ESS over all parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceGate {
    pub max_r_hat: f64,
    pub min_ess: f64,
}

impl Default for ConvergenceGate {
    fn default() -> Self {
        Self {
            max_r_hat: 1.05,
            min_ess: 200.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateVerdict {
    pub accepted: bool,
    pub max_r_hat: Option<f64>,
    pub min_ess: Option<f64>,
    pub thresholds: ConvergenceGate,
    /// Parameters violating a threshold (or with undefined diagnostics).
    pub failures: Vec<ParamSummary>,
}

impl ConvergenceGate {
    pub fn evaluate(&self, summaries: &[ParamSummary]) -> GateVerdict {
        let failures: Vec<ParamSummary> = summaries
            .iter()
            .filter(|s| match (s.r_hat, s.ess) {
                (Some(r), Some(e)) => r > self.max_r_hat || e < self.min_ess,
                _ => true,
            })
            .cloned()
            .collect();
        let max_r_hat = summaries.iter().filter_map(|s| s.r_hat).reduce(f64::max);
        let min_ess = summaries.iter().filter_map(|s| s.ess).reduce(f64::min);
        GateVerdict {
            accepted: failures.is_empty(),
            max_r_hat,
            min_ess,
            thresholds: *self,
            failures,
        }
    }
}

impl ChainSet {
    pub fn from_chains(
        names: Vec<String>,
        chains: Vec<Vec<f64>>,
        stats: Vec<ChainStats>,
        metadata: RunMetadata,
    ) -> Result<Self> {
        let dim = names.len();
        if dim == 0 || chains.is_empty() {
            return Err(Error::Structural("chain set needs at least one parameter and one chain".into()));
        }
        let n_draws = chains[0].len() / dim;
        if chains.iter().any(|c| c.len() != n_draws * dim) || n_draws == 0 {
            return Err(Error::Structural("chains have inconsistent lengths".into()));
        }
        if chains.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Structural("non-finite posterior draw".into()));
        }
        if !stats.is_empty() && stats.len() != chains.len() {
            return Err(Error::Structural("one stats record per chain expected".into()));
        }
        Ok(Self {
            names,
            n_draws,
            chains,
            stats,
            metadata,
        })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn n_chains(&self) -> usize {
        self.chains.len()
    }

    pub fn n_draws(&self) -> usize {
        self.n_draws
    }

    pub fn total_draws(&self) -> usize {
        self.n_draws * self.chains.len()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn draw(&self, chain: usize, iteration: usize) -> &[f64] {
        let d = self.dim();
        &self.chains[chain][iteration * d..(iteration + 1) * d]
    }

    /// Draws in (chain, iteration) order.
    pub fn iter_draws(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.chains.iter().flat_map(move |c| c.chunks_exact(self.dim()))
    }

    /// The `k`-th draw of the flattened (chain, iteration) sequence.
    pub fn flat_draw(&self, k: usize) -> &[f64] {
        self.draw(k / self.n_draws, k % self.n_draws)
    }

    /// Per-chain traces of parameter `p`.
    pub fn param_chains(&self, p: usize) -> Vec<Vec<f64>> {
        let d = self.dim();
        self.chains
            .iter()
            .map(|c| c.iter().skip(p).step_by(d).copied().collect())
            .collect()
    }

    pub fn param_mean(&self, p: usize) -> f64 {
        let d = self.dim();
        let total: f64 = self.chains.iter().flat_map(|c| c.iter().skip(p).step_by(d)).sum();
        total / self.total_draws() as f64
    }

    /// Apply `f` to every draw, producing a new set with parameters `names`.
    pub fn map_draws<F>(&self, names: Vec<String>, f: F) -> Result<ChainSet>
    where
        F: Fn(&[f64]) -> Vec<f64>,
    {
        let chains = self
            .chains
            .iter()
            .map(|c| c.chunks_exact(self.dim()).flat_map(&f).collect())
            .collect();
        ChainSet::from_chains(names, chains, self.stats.clone(), self.metadata.clone())
    }

    pub fn summarize_param(&self, p: usize) -> ParamSummary {
        let traces = self.param_chains(p);
        let mut all: Vec<f64> = traces.iter().flatten().copied().collect();
        let n = all.len() as f64;
        let mean = all.iter().sum::<f64>() / n;
        let sd = if all.len() > 1 {
            (all.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        all.sort_by(f64::total_cmp);
        let refs: Vec<&[f64]> = traces.iter().map(Vec::as_slice).collect();
        ParamSummary {
            name: self.names[p].clone(),
            mean,
            sd,
            q2_5: quantile_sorted(&all, 0.025),
            q50: quantile_sorted(&all, 0.5),
            q97_5: quantile_sorted(&all, 0.975),
            r_hat: r_hat(&refs).ok(),
            ess: ess(&refs).ok(),
        }
    }

    pub fn summarize(&self) -> Vec<ParamSummary> {
        use rayon::prelude::*;
        (0..self.dim()).into_par_iter().map(|p| self.summarize_param(p)).collect()
    }

    /// Wide CSV: `chain,iteration,<parameter names...>`, one row per draw.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header = vec!["chain".to_string(), "iteration".to_string()];
        header.extend(self.names.iter().cloned());
        wtr.write_record(&header)?;
        let mut row = Vec::with_capacity(self.dim() + 2);
        for (c, chain) in self.chains.iter().enumerate() {
            for (i, draw) in chain.chunks_exact(self.dim()).enumerate() {
                row.clear();
                row.push(c.to_string());
                row.push(i.to_string());
                row.extend(draw.iter().map(|v| v.to_string()));
                wtr.write_record(&row)?;
            }
        }
        wtr.flush()?;
        Ok(())
    }

    /// Inverse of [`ChainSet::write_csv`]; stats and metadata are supplied by the caller.
    pub fn read_csv<R: Read>(reader: R, metadata: RunMetadata) -> Result<ChainSet> {
        let mut rdr = csv::Reader::from_reader(reader);
        let header = rdr.headers()?.clone();
        if header.len() < 3 || &header[0] != "chain" || &header[1] != "iteration" {
            return Err(Error::Structural("draws file must start with chain,iteration columns".into()));
        }
        let names: Vec<String> = header.iter().skip(2).map(str::to_owned).collect();
        let dim = names.len();
        let mut chains: Vec<Vec<f64>> = Vec::new();
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Structural(format!("unparseable value {s:?} in draws file")))
        };
        for rec in rdr.records() {
            let rec = rec?;
            let c: usize = rec[0].parse().map_err(|_| Error::Structural("bad chain index".into()))?;
            let i: usize = rec[1].parse().map_err(|_| Error::Structural("bad iteration index".into()))?;
            if c > chains.len() || (c == chains.len() && i != 0) {
                return Err(Error::Structural("draws file rows are not ordered by chain".into()));
            }
            if c == chains.len() {
                chains.push(Vec::new());
            }
            if chains[c].len() != i * dim {
                return Err(Error::Structural(format!("chain {c} is missing draws before iteration {i}")));
            }
            for v in rec.iter().skip(2) {
                chains[c].push(parse(v)?);
            }
        }
        if chains.is_empty() {
            return Err(Error::Structural("draws file has no rows".into()));
        }
        if chains.iter().any(|ch| ch.len() != chains[0].len()) {
            return Err(Error::Structural("chains in draws file have different lengths".into()));
        }
        ChainSet::from_chains(names, chains, Vec::new(), metadata)
    }
}

/// Linear-interpolation quantile (type 7) of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta() -> RunMetadata {
        RunMetadata {
            seed: 1,
            algorithm: "test".into(),
            rng: "none".into(),
            n_chains: 2,
            n_warmup: 0,
            n_samples: 3,
            target_acceptance: 0.5,
        }
    }

    fn toy() -> ChainSet {
        ChainSet::from_chains(
            vec!["a".into(), "b".into()],
            vec![vec![1.0, 10.0, 2.0, 20.0, 3.0, 30.0], vec![4.0, 40.0, 5.0, 50.0, 6.0, 60.0]],
            Vec::new(),
            meta(),
        )
        .unwrap()
    }

    #[test]
    fn indexing() {
        let cs = toy();
        assert_eq!(cs.draw(1, 0), &[4.0, 40.0]);
        assert_eq!(cs.param_chains(1), vec![vec![10.0, 20.0, 30.0], vec![40.0, 50.0, 60.0]]);
        assert_eq!(cs.flat_draw(4), &[5.0, 50.0]);
        assert_eq!(cs.param_mean(0), 3.5);
        assert_eq!(cs.iter_draws().count(), 6);
    }

    #[test]
    fn csv_round_trip() {
        let cs = toy();
        let mut buf = Vec::new();
        cs.write_csv(&mut buf).unwrap();
        let back = ChainSet::read_csv(buf.as_slice(), meta()).unwrap();
        assert_eq!(back, cs);
    }

    #[test]
    fn rejects_non_finite() {
        let err = ChainSet::from_chains(vec!["a".into()], vec![vec![1.0, f64::NAN]], Vec::new(), meta());
        assert!(err.is_err());
    }

    #[test]
    fn gate_flags_undefined_diagnostics() {
        let s = ParamSummary {
            name: "x".into(),
            mean: 0.0,
            sd: 0.0,
            q2_5: 0.0,
            q50: 0.0,
            q97_5: 0.0,
            r_hat: None,
            ess: None,
        };
        let v = ConvergenceGate::default().evaluate(&[s]);
        assert!(!v.accepted);
    }

    #[test]
    fn quantiles() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile_sorted(&xs, 0.5), 3.0);
        assert_eq!(quantile_sorted(&xs, 0.0), 1.0);
        assert_eq!(quantile_sorted(&xs, 0.25), 2.0);
    }
}
