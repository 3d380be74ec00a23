//! Posterior-predictive checks: zero-ratio error, empirical KL divergence and
//! the hurdle-vs-Gaussian KL ratio.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fraction of values that are exactly `0.0`.
pub fn zero_fraction(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().filter(|&&v| v == 0.0).count() as f64 / values.len() as f64
}

/// Median by sorting a copy; `NaN` for an empty slice.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Replicated datasets for one language, one row per replication.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationSet {
    pub language: String,
    reps: Vec<Vec<f64>>,
}

impl ReplicationSet {
    pub fn new(language: impl Into<String>, reps: Vec<Vec<f64>>, n_jobs: usize) -> Result<Self> {
        if reps.is_empty() {
            return Err(Error::InsufficientData("at least one replication is required".into()));
        }
        if let Some(bad) = reps.iter().position(|r| r.len() != n_jobs) {
            return Err(Error::Structural(format!(
                "replication {bad} has {} values, the slice has {n_jobs} jobs",
                reps[bad].len()
            )));
        }
        if reps.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Validation("replicated values must be finite".into()));
        }
        Ok(Self {
            language: language.into(),
            reps,
        })
    }

    pub fn n_reps(&self) -> usize {
        self.reps.len()
    }

    pub fn n_jobs(&self) -> usize {
        self.reps[0].len()
    }

    pub fn reps(&self) -> &[Vec<f64>] {
        &self.reps
    }

    /// All replications concatenated.
    pub fn pooled(&self) -> Vec<f64> {
        self.reps.concat()
    }

    pub fn negative_fraction(&self) -> f64 {
        let n = self.n_reps() * self.n_jobs();
        self.reps.iter().flatten().filter(|&&v| v < 0.0).count() as f64 / n as f64
    }
}

/// Mean over replications of `|Z(rep) - Z(observed)|`.
pub fn mae_zero_ratio(reps: &[Vec<f64>], observed: &[f64]) -> Result<f64> {
    if observed.is_empty() {
        return Err(Error::InsufficientData("observed slice is empty".into()));
    }
    if reps.is_empty() {
        return Err(Error::InsufficientData("at least one replication is required".into()));
    }
    let z = zero_fraction(observed);
    Ok(reps.iter().map(|r| (zero_fraction(r) - z).abs()).sum::<f64>() / reps.len() as f64)
}

/// Histogram layout shared by the two samples of a KL estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Binning {
    /// Equal-width bins for the non-zero values.
    pub n_bins: usize,
    /// Probability mass added to every bin before renormalizing.
    pub epsilon: f64,
}

impl Default for Binning {
    fn default() -> Self {
        Self {
            n_bins: 50,
            epsilon: 1e-9,
        }
    }
}

/// Shared bins: index 0 holds exact zeros, the rest split `(lower, upper]`.
///
/// `lower` is 0 unless a sample has negative values, in which case the range
/// is widened down to the smallest value so Gaussian replicates can be binned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharedBins {
    pub lower: f64,
    pub upper: f64,
    pub n_bins: usize,
}

impl SharedBins {
    pub fn fit(samples: &[&[f64]], n_bins: usize) -> Result<Self> {
        if n_bins == 0 {
            return Err(Error::Validation("n_bins must be at least 1".into()));
        }
        let mut any_zero = false;
        let mut lo = 0.0_f64;
        let mut hi = f64::NEG_INFINITY;
        for s in samples {
            if s.is_empty() {
                return Err(Error::InsufficientData("KL samples must be non-empty".into()));
            }
            for &v in *s {
                if !v.is_finite() {
                    return Err(Error::Validation("KL samples must be finite".into()));
                }
                any_zero |= v == 0.0;
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        if hi <= 0.0 && !any_zero {
            return Err(Error::Validation("degenerate binning: no positive values and no zeros".into()));
        }
        Ok(Self {
            lower: lo,
            upper: hi.max(0.0),
            n_bins,
        })
    }

    pub fn len(&self) -> usize {
        self.n_bins + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index(&self, v: f64) -> usize {
        if v == 0.0 {
            return 0;
        }
        let width = (self.upper - self.lower) / self.n_bins as f64;
        // bins are right-closed; the minimum itself goes to the first bin
        let k = ((v - self.lower) / width).ceil() as isize - 1;
        1 + k.clamp(0, self.n_bins as isize - 1) as usize
    }

    /// `(lower, upper)` edges of bin `i`; the zero bin is `(0, 0)`.
    pub fn edges(&self, i: usize) -> (f64, f64) {
        if i == 0 {
            return (0.0, 0.0);
        }
        let width = (self.upper - self.lower) / self.n_bins as f64;
        (self.lower + (i - 1) as f64 * width, self.lower + i as f64 * width)
    }

    pub fn counts(&self, values: &[f64]) -> Vec<u64> {
        let mut c = vec![0u64; self.len()];
        for &v in values {
            c[self.index(v)] += 1;
        }
        c
    }

    /// Smoothed probabilities: `(count / n + ε) / (1 + K ε)`.
    pub fn probabilities(&self, values: &[f64], epsilon: f64) -> Vec<f64> {
        let n = values.len() as f64;
        let norm = 1.0 + self.len() as f64 * epsilon;
        self.counts(values).into_iter().map(|c| (c as f64 / n + epsilon) / norm).collect()
    }
}

fn kl_from_probs(p: &[f64], q: &[f64]) -> f64 {
    let kl: f64 = p.iter().zip(q).map(|(&pi, &qi)| pi * (pi / qi).ln()).sum();
    // rounding can leave a tiny negative value for identical histograms
    kl.max(0.0)
}

/// `KL(p ‖ q) = Σ p ln(p / q)` over a histogram shared by both samples.
pub fn empirical_kl(p: &[f64], q: &[f64], binning: &Binning) -> Result<f64> {
    let bins = SharedBins::fit(&[p, q], binning.n_bins)?;
    Ok(kl_from_probs(
        &bins.probabilities(p, binning.epsilon),
        &bins.probabilities(q, binning.epsilon),
    ))
}

/// KL of the observed data against a model's replicates, both views.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KlSummary {
    /// Against all replications pooled.
    pub pooled: f64,
    /// Mean of the per-replication divergences.
    pub per_rep_mean: f64,
}

pub fn kl_summary(observed: &[f64], reps: &ReplicationSet, binning: &Binning) -> Result<KlSummary> {
    let pooled = empirical_kl(observed, &reps.pooled(), binning)?;
    let per_rep: Vec<f64> = reps
        .reps()
        .par_iter()
        .map(|r| empirical_kl(observed, r, binning))
        .collect::<Result<_>>()?;
    Ok(KlSummary {
        pooled,
        per_rep_mean: per_rep.iter().sum::<f64>() / per_rep.len() as f64,
    })
}

/// Per-model part of a PPC entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelCheck {
    pub n_reps: usize,
    pub mae_zero_ratio: f64,
    pub zero_fraction: f64,
    pub negative_fraction: f64,
    pub median: f64,
    pub kl: KlSummary,
}

impl ModelCheck {
    pub fn compute(observed: &[f64], reps: &ReplicationSet, binning: &Binning) -> Result<Self> {
        if reps.n_jobs() != observed.len() {
            return Err(Error::Structural("replications do not share the observed slice".into()));
        }
        let pooled = reps.pooled();
        Ok(Self {
            n_reps: reps.n_reps(),
            mae_zero_ratio: mae_zero_ratio(reps.reps(), observed)?,
            zero_fraction: zero_fraction(&pooled),
            negative_fraction: reps.negative_fraction(),
            median: median(&pooled),
            kl: kl_summary(observed, reps, binning)?,
        })
    }
}

/// One language's row of the PPC report; absent models are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpcEntry {
    pub language: String,
    pub n_jobs: usize,
    pub observed_zero_fraction: f64,
    pub observed_median: f64,
    pub hurdle: Option<ModelCheck>,
    pub gaussian: Option<ModelCheck>,
    /// `KL_H / KL_G` on pooled replicates; below 1 favours the hurdle model.
    pub kl_ratio: Option<f64>,
    /// Same ratio from the per-replication means.
    pub kl_ratio_per_rep: Option<f64>,
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    if num == den {
        Some(1.0)
    } else if den > 0.0 {
        Some(num / den)
    } else {
        None
    }
}

pub fn kl_ratio_report(
    language: &str,
    observed: &[f64],
    gaussian: Option<&ReplicationSet>,
    hurdle: Option<&ReplicationSet>,
    binning: &Binning,
) -> Result<PpcEntry> {
    if observed.is_empty() {
        return Err(Error::InsufficientData(format!("no observed jobs for {language}")));
    }
    let gaussian = gaussian.map(|r| ModelCheck::compute(observed, r, binning)).transpose()?;
    let hurdle = hurdle.map(|r| ModelCheck::compute(observed, r, binning)).transpose()?;
    let (kl_ratio, kl_ratio_per_rep) = match (&hurdle, &gaussian) {
        (Some(h), Some(g)) => (ratio(h.kl.pooled, g.kl.pooled), ratio(h.kl.per_rep_mean, g.kl.per_rep_mean)),
        _ => (None, None),
    };
    Ok(PpcEntry {
        language: language.to_owned(),
        n_jobs: observed.len(),
        observed_zero_fraction: zero_fraction(observed),
        observed_median: median(observed),
        hurdle,
        gaussian,
        kl_ratio,
        kl_ratio_per_rep,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpcReport {
    pub binning: Binning,
    pub entries: Vec<PpcEntry>,
}

const CSV_HEADER: [&str; 18] = [
    "language",
    "n_jobs",
    "observed_zero_fraction",
    "observed_median",
    "hurdle_n_reps",
    "hurdle_mae_zero_ratio",
    "hurdle_zero_fraction",
    "hurdle_median",
    "hurdle_kl",
    "hurdle_kl_per_rep",
    "gaussian_n_reps",
    "gaussian_mae_zero_ratio",
    "gaussian_negative_fraction",
    "gaussian_median",
    "gaussian_kl",
    "gaussian_kl_per_rep",
    "kl_ratio",
    "kl_ratio_per_rep",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl PpcReport {
    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }

    /// One row per language; missing values are empty cells.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(CSV_HEADER)?;
        for e in &self.entries {
            let h = e.hurdle.as_ref();
            let g = e.gaussian.as_ref();
            out.write_record([
                e.language.clone(),
                e.n_jobs.to_string(),
                e.observed_zero_fraction.to_string(),
                e.observed_median.to_string(),
                h.map(|m| m.n_reps.to_string()).unwrap_or_default(),
                opt(h.map(|m| m.mae_zero_ratio)),
                opt(h.map(|m| m.zero_fraction)),
                opt(h.map(|m| m.median)),
                opt(h.map(|m| m.kl.pooled)),
                opt(h.map(|m| m.kl.per_rep_mean)),
                g.map(|m| m.n_reps.to_string()).unwrap_or_default(),
                opt(g.map(|m| m.mae_zero_ratio)),
                opt(g.map(|m| m.negative_fraction)),
                opt(g.map(|m| m.median)),
                opt(g.map(|m| m.kl.pooled)),
                opt(g.map(|m| m.kl.per_rep_mean)),
                opt(e.kl_ratio),
                opt(e.kl_ratio_per_rep),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Histogram of several named samples on shared bins, as fractions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramTable {
    pub bins: SharedBins,
    pub series: Vec<(String, Vec<f64>)>,
}

impl HistogramTable {
    pub fn new(series: &[(&str, &[f64])], n_bins: usize) -> Result<Self> {
        let samples: Vec<&[f64]> = series.iter().map(|(_, s)| *s).collect();
        let bins = SharedBins::fit(&samples, n_bins)?;
        let series = series
            .iter()
            .map(|(name, s)| {
                let n = s.len() as f64;
                let fr = bins.counts(s).into_iter().map(|c| c as f64 / n).collect();
                (name.to_string(), fr)
            })
            .collect();
        Ok(Self { bins, series })
    }

    /// Columns `bin_lower, bin_upper, <series...>`; the first row is the zero bin.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["bin_lower".to_string(), "bin_upper".to_string()];
        header.extend(self.series.iter().map(|(n, _)| n.clone()));
        out.write_record(&header)?;
        for i in 0..self.bins.len() {
            let (lo, hi) = self.bins.edges(i);
            let mut row = vec![lo.to_string(), hi.to_string()];
            row.extend(self.series.iter().map(|(_, f)| f[i].to_string()));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}
