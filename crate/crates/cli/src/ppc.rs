use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::Context;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tqa_core::inference::ChainSet;
use tqa_core::ppc::{kl_ratio_report, median, Binning, HistogramTable, PpcEntry, PpcReport, ReplicationSet};
use tqa_core::{Dataset, GaussianModel, HurdleModel, RngStreams};

use crate::fit::{fit_dir, select_languages, FitSummary, ModelKind};
use crate::output::{fnv1a, input_error, read_input, safe_component, unix_now, OutDir, RunManifest, Timing};
use crate::svg;
use crate::{load_config, Common};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpcConfig {
    pub seed: u64,
    pub reps: usize,
    pub binning: Binning,
    /// Bins of the exported histograms (zero atom excluded).
    pub plot_bins: usize,
}

impl Default for PpcConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            reps: 1000,
            binning: Binning::default(),
            plot_bins: 40,
        }
    }
}

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Directory holding `hurdle/` and/or `gaussian/` fits.
    #[arg(long)]
    fit: PathBuf,
    /// The dataset the fits were run on.
    #[arg(long)]
    data: PathBuf,
    /// Replicated datasets per model (default 1000)
    #[arg(long)]
    reps: Option<usize>,
    /// Equal-width bins for the KL histograms.
    #[arg(long)]
    bins: Option<usize>,
    /// Restrict to these languages (repeatable)
    #[arg(long = "language")]
    languages: Vec<String>,
}

/// Load a fit's draws, or `None` when the model was not fitted for `language`.
pub fn load_draws(root: &Path, model: ModelKind, language: &str) -> anyhow::Result<Option<(FitSummary, ChainSet)>> {
    let dir = fit_dir(root, model, language);
    let (summary_path, draws_path) = (dir.join("summary.json"), dir.join("draws.csv"));
    if !summary_path.exists() || !draws_path.exists() {
        return Ok(None);
    }
    let summary: FitSummary = serde_json::from_reader(BufReader::new(
        File::open(&summary_path).with_context(|| format!("opening {}", summary_path.display()))?,
    ))
    .map_err(|e| input_error(format!("invalid fit summary {}: {e}", summary_path.display())))?;
    let draws = read_input(&draws_path, "draws", |p| {
        ChainSet::read_csv(BufReader::new(File::open(p)?), summary.sampler.clone())
    })?;
    Ok(Some((summary, draws)))
}

fn replicate(
    model: ModelKind,
    slice: &Dataset,
    draws: &ChainSet,
    reps: usize,
    streams: RngStreams,
) -> tqa_core::Result<Vec<Vec<f64>>> {
    match model {
        ModelKind::Hurdle => HurdleModel::new(slice)?.posterior_predictive(draws, reps, streams),
        ModelKind::Gaussian => GaussianModel::new(slice)?.posterior_predictive(draws, reps, streams),
    }
}

struct LanguageCheck {
    entry: PpcEntry,
    histogram: HistogramTable,
    medians: Vec<Option<f64>>,
    warnings: Vec<String>,
}

fn check_language(fit_root: &Path, data: &Dataset, language: &str, cfg: &PpcConfig) -> anyhow::Result<LanguageCheck> {
    let slice = data.language_slice(language).expect("selected from the dataset");
    let observed = slice.epts();
    let streams = RngStreams::new(cfg.seed).split(fnv1a(language));
    let mut sets: Vec<Option<ReplicationSet>> = Vec::new();
    let mut warnings = Vec::new();
    for (k, model) in ModelKind::ALL.into_iter().enumerate() {
        let set = match load_draws(fit_root, model, language)? {
            None => {
                warnings.push(format!("no {} fit for {language}; its columns are null", model.dir()));
                None
            }
            Some((summary, draws)) => {
                if !summary.gate.accepted {
                    warnings.push(format!("{} fit for {language} did not pass the convergence gate", model.dir()));
                }
                let reps = replicate(model, &slice, &draws, cfg.reps, streams.split(k as u64))
                    .map_err(|e| input_error(format!("{} fit for {language} does not match the dataset: {e}", model.dir())))?;
                Some(ReplicationSet::new(language, reps, slice.len())?)
            }
        };
        sets.push(set);
    }
    let (hurdle, gaussian) = (sets[0].as_ref(), sets[1].as_ref());
    let entry = kl_ratio_report(language, &observed, gaussian, hurdle, &cfg.binning)?;

    let pooled: Vec<(String, Vec<f64>)> = std::iter::once(("observed".to_string(), observed.clone()))
        .chain(
            ModelKind::ALL
                .iter()
                .zip(&sets)
                .filter_map(|(m, s)| s.as_ref().map(|s| (m.dir().to_string(), s.pooled()))),
        )
        .collect();
    let series: Vec<(&str, &[f64])> = pooled.iter().map(|(n, v)| (n.as_str(), v.as_slice())).collect();
    let histogram = HistogramTable::new(&series, cfg.plot_bins)?;
    let medians = pooled.iter().map(|(_, v)| Some(median(v))).collect();
    Ok(LanguageCheck {
        entry,
        histogram,
        medians,
        warnings,
    })
}

pub fn run(common: &Common, args: Args) -> anyhow::Result<()> {
    let started = unix_now();
    let mut cfg: PpcConfig = load_config(common.config.as_deref())?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(r) = args.reps {
        cfg.reps = r;
    }
    if let Some(b) = args.bins {
        cfg.binning.n_bins = b;
    }
    if cfg.reps == 0 || cfg.binning.n_bins == 0 || cfg.plot_bins == 0 {
        return Err(input_error("reps and bin counts must be at least 1"));
    }
    if !(cfg.binning.epsilon > 0.0) {
        return Err(input_error("binning.epsilon must be positive"));
    }
    if !args.fit.is_dir() {
        return Err(input_error(format!("fit directory {} does not exist", args.fit.display())));
    }
    let data = read_input(&args.data, "dataset", |p| Dataset::load(p))?;
    let languages = select_languages(&data, &args.languages)?;
    for l in &languages {
        safe_component(l)?;
    }

    let checks: Vec<anyhow::Result<LanguageCheck>> =
        languages.par_iter().map(|l| check_language(&args.fit, &data, l, &cfg)).collect();

    let mut out = OutDir::create(&common.out)?;
    let mut entries = Vec::new();
    let mut warnings = Vec::new();
    for (lang, check) in languages.iter().zip(checks) {
        let check = check.map_err(|e| e.context(format!("checking {lang}")))?;
        check.histogram.write_csv(out.writer(&format!("histograms/{lang}.csv"))?)?;
        let edges: Vec<(f64, f64)> = (0..check.histogram.bins.len()).map(|i| check.histogram.bins.edges(i)).collect();
        let series: Vec<svg::Series> = check
            .histogram
            .series
            .iter()
            .zip(&check.medians)
            .map(|((name, fr), m)| svg::Series {
                label: name,
                fractions: fr,
                median: *m,
            })
            .collect();
        out.write_text(
            &format!("histograms/{lang}.svg"),
            &svg::histogram(&format!("EPT distribution, {lang}"), "EPT", &edges, &series),
        )?;
        for w in &check.warnings {
            eprintln!("warning: {w}");
        }
        warnings.extend(check.warnings);
        let e = &check.entry;
        eprintln!(
            "{lang}: MAE(Z) hurdle {}, KL_H/KL_G {}",
            e.hurdle.as_ref().map_or("n/a".into(), |h| format!("{:.4}", h.mae_zero_ratio)),
            e.kl_ratio.map_or("n/a".into(), |r| format!("{r:.3}"))
        );
        entries.push(check.entry);
    }
    let report = PpcReport {
        binning: cfg.binning,
        entries,
    };
    report.write_json(out.writer("ppc_report.json")?)?;
    report.write_csv(out.writer("ppc_report.csv")?)?;
    out.finish(RunManifest {
        command: "ppc".into(),
        tool_version: env!("CARGO_PKG_VERSION"),
        seed: cfg.seed,
        config: json!(cfg),
        inputs: vec![args.fit.display().to_string(), args.data.display().to_string()],
        outputs: Vec::new(),
        warnings,
        timing: Timing {
            started_unix: started,
            finished_unix: 0,
        },
    })
}
