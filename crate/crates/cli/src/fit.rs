use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tqa_core::analysis::SliceStats;
use tqa_core::inference::{
    run_mcmc, Algorithm, ChainSet, ConvergenceGate, GateVerdict, ParamSummary, RunMetadata, SamplerConfig,
};
use tqa_core::model_hurdle::HurdlePriors;
use tqa_core::{Dataset, GaussianModel, HurdleModel};

use crate::output::{fnv1a, input_error, read_input, safe_component, unix_now, Failure, OutDir, RunManifest, Timing};
use crate::{load_config, Common};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Hurdle,
    Gaussian,
}

impl ModelKind {
    pub const ALL: [ModelKind; 2] = [ModelKind::Hurdle, ModelKind::Gaussian];

    pub fn dir(self) -> &'static str {
        match self {
            ModelKind::Hurdle => "hurdle",
            ModelKind::Gaussian => "gaussian",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PriorChoice {
    /// `π_r ~ Beta(1.5, 5)`, `π_l, π_t ~ Beta(2, 5)`.
    #[default]
    ReviewerLowerMode,
    /// `π_r ~ Beta(2, 5)`, `π_l, π_t ~ Beta(1.5, 5)`.
    ReviewerHigherMode,
}

/// Sampler settings for model fits; NUTS unless configured otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSampler {
    pub algorithm: Algorithm,
    pub n_chains: usize,
    pub n_warmup: usize,
    pub n_samples: usize,
    pub target_acceptance: Option<f64>,
    pub max_tree_depth: usize,
    pub init_jitter: f64,
    pub stuck_window: usize,
}

impl Default for FitSampler {
    fn default() -> Self {
        let s = SamplerConfig::default();
        Self {
            algorithm: Algorithm::Nuts,
            n_chains: s.n_chains,
            n_warmup: s.n_warmup,
            n_samples: s.n_samples,
            target_acceptance: None,
            max_tree_depth: s.max_tree_depth,
            init_jitter: s.init_jitter,
            stuck_window: s.stuck_window,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub seed: u64,
    pub sampler: FitSampler,
    pub gate: ConvergenceGate,
    pub hurdle_priors: PriorChoice,
}

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Dataset CSV.
    #[arg(long)]
    data: PathBuf,
    /// Model to fit.
    #[arg(long, value_enum)]
    model: ModelKind,
    /// Restrict to these languages (repeatable).
    #[arg(long = "language")]
    languages: Vec<String>,
    /// Sampler (default nuts)
    #[arg(long, value_parser = ["nuts", "rwm"])]
    algorithm: Option<String>,
    /// Number of chains
    #[arg(long)]
    chains: Option<usize>,
    /// Warmup iterations per chain
    #[arg(long)]
    warmup: Option<usize>,
    /// Retained draws per chain
    #[arg(long)]
    samples: Option<usize>,
    /// Target acceptance rate for step-size adaptation
    #[arg(long)]
    target_accept: Option<f64>,
    /// Maximum NUTS tree depth
    #[arg(long)]
    max_depth: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainReport {
    pub acceptance_rate: f64,
    pub step_size: f64,
    pub n_divergent: usize,
    pub mean_tree_depth: f64,
    pub n_gradient_evals: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitTiming {
    pub chain_secs: Vec<f64>,
    pub total_secs: f64,
}

/// Everything `summary.json` holds for one language.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitSummary {
    pub language: String,
    pub model: ModelKind,
    pub n_jobs: usize,
    pub zero_fraction: f64,
    pub entities: SliceStats,
    pub sampler: RunMetadata,
    pub gate: GateVerdict,
    pub chains: Vec<ChainReport>,
    pub params: Vec<ParamSummary>,
    pub timing: FitTiming,
}

/// Seed of a language's fit: independent of which other languages are fitted.
pub fn language_seed(seed: u64, language: &str) -> u64 {
    tqa_core::RngStreams::new(seed).split(fnv1a(language)).seed()
}

pub fn fit_dir(root: &Path, model: ModelKind, language: &str) -> PathBuf {
    root.join(model.dir()).join(language)
}

struct LanguageFit {
    summary: FitSummary,
    draws: ChainSet,
}

fn fit_language(slice: &Dataset, language: &str, model: ModelKind, cfg: &FitConfig, seed: u64) -> anyhow::Result<LanguageFit> {
    let s = &cfg.sampler;
    let sampler = SamplerConfig {
        n_chains: s.n_chains,
        n_warmup: s.n_warmup,
        n_samples: s.n_samples,
        seed: language_seed(seed, language),
        target_acceptance: s.target_acceptance,
        algorithm: s.algorithm,
        max_tree_depth: s.max_tree_depth,
        init_jitter: s.init_jitter,
        stuck_window: s.stuck_window,
    };
    sampler.validate().map_err(|e| input_error(format!("invalid sampler settings: {e}")))?;
    let t0 = Instant::now();
    let draws = match model {
        ModelKind::Hurdle => {
            let priors = match cfg.hurdle_priors {
                PriorChoice::ReviewerLowerMode => HurdlePriors::reviewer_lower_mode(),
                PriorChoice::ReviewerHigherMode => HurdlePriors::reviewer_higher_mode(),
            };
            let m = HurdleModel::with_priors(slice, priors)?;
            let init = m.unconstrain(&m.initial_params())?;
            let raw = run_mcmc(&m, &init, &sampler)?;
            let mut d = m.constrained_draws(&raw)?;
            d.stats = raw.stats;
            d
        }
        ModelKind::Gaussian => {
            let m = GaussianModel::new(slice)?;
            m.sample_posterior(&sampler)?
        }
    };
    let params = draws.summarize();
    let gate = cfg.gate.evaluate(&params);
    let summary = FitSummary {
        language: language.to_owned(),
        model,
        n_jobs: slice.len(),
        zero_fraction: slice.zero_fraction(),
        entities: SliceStats::from_dataset(slice),
        sampler: draws.metadata.clone(),
        gate,
        chains: draws
            .stats
            .iter()
            .map(|c| ChainReport {
                acceptance_rate: c.acceptance_rate,
                step_size: c.step_size,
                n_divergent: c.n_divergent,
                mean_tree_depth: c.mean_tree_depth,
                n_gradient_evals: c.n_gradient_evals,
            })
            .collect(),
        params,
        timing: FitTiming {
            chain_secs: draws.stats.iter().map(|c| c.duration_secs).collect(),
            total_secs: t0.elapsed().as_secs_f64(),
        },
    };
    Ok(LanguageFit { summary, draws })
}

/// Languages of `data` to process, validated against the filter.
pub fn select_languages(data: &Dataset, filter: &[String]) -> anyhow::Result<Vec<String>> {
    let all: Vec<String> = data.languages().map(str::to_owned).collect();
    if filter.is_empty() {
        return Ok(all);
    }
    let mut chosen = Vec::new();
    for l in filter {
        if !all.contains(l) {
            return Err(input_error(format!("language {l:?} is not in the dataset (available: {})", all.join(", "))));
        }
        if !chosen.contains(l) {
            chosen.push(l.clone());
        }
    }
    chosen.sort();
    Ok(chosen)
}

pub fn run(common: &Common, args: Args) -> anyhow::Result<()> {
    let started = unix_now();
    let mut cfg: FitConfig = load_config(common.config.as_deref())?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(a) = args.algorithm.as_deref() {
        cfg.sampler.algorithm = a.parse()?;
    }
    if let Some(v) = args.chains {
        cfg.sampler.n_chains = v;
    }
    if let Some(v) = args.warmup {
        cfg.sampler.n_warmup = v;
    }
    if let Some(v) = args.samples {
        cfg.sampler.n_samples = v;
    }
    if args.target_accept.is_some() {
        cfg.sampler.target_acceptance = args.target_accept;
    }
    if let Some(v) = args.max_depth {
        cfg.sampler.max_tree_depth = v;
    }

    let data = read_input(&args.data, "dataset", |p| Dataset::load(p))?;
    for w in data.warnings() {
        eprintln!("warning: {w}");
    }
    let languages = select_languages(&data, &args.languages)?;
    for l in &languages {
        safe_component(l)?;
    }

    let fits: Vec<anyhow::Result<LanguageFit>> = languages
        .par_iter()
        .map(|l| {
            let slice = data.language_slice(l).expect("selected from the dataset");
            fit_language(&slice, l, args.model, &cfg, cfg.seed)
        })
        .collect();

    let mut out = OutDir::create(&common.out.join(args.model.dir()))?;
    let mut failures = Vec::new();
    for (lang, fit) in languages.iter().zip(fits) {
        let fit = fit.map_err(|e| e.context(format!("fitting {lang}")))?;
        fit.draws.write_csv(out.writer(&format!("{lang}/draws.csv"))?)?;
        out.write_json(&format!("{lang}/summary.json"), &fit.summary)?;
        let g = &fit.summary.gate;
        eprintln!(
            "{lang}: {} jobs, max R-hat {}, min ESS {}, {}",
            fit.summary.n_jobs,
            g.max_r_hat.map_or("n/a".into(), |v| format!("{v:.3}")),
            g.min_ess.map_or("n/a".into(), |v| format!("{v:.0}")),
            if g.accepted { "accepted" } else { "REJECTED" }
        );
        if !g.accepted {
            failures.push((lang.clone(), g.failures.clone()));
        }
    }
    out.finish(RunManifest {
        command: format!("fit --model {}", args.model.dir()),
        tool_version: env!("CARGO_PKG_VERSION"),
        seed: cfg.seed,
        config: json!(cfg),
        inputs: vec![args.data.display().to_string()],
        outputs: Vec::new(),
        warnings: data.warnings(),
        timing: Timing {
            started_unix: started,
            finished_unix: 0,
        },
    })?;

    if failures.is_empty() {
        return Ok(());
    }
    eprintln!("{:<12} {:<32} {:>8} {:>8}", "language", "parameter", "r_hat", "ess");
    for (lang, params) in &failures {
        for p in params {
            eprintln!(
                "{lang:<12} {:<32} {:>8} {:>8}",
                p.name,
                p.r_hat.map_or("n/a".into(), |v| format!("{v:.3}")),
                p.ess.map_or("n/a".into(), |v| format!("{v:.0}"))
            );
        }
    }
    let langs: Vec<&str> = failures.iter().map(|f| f.0.as_str()).collect();
    Err(Failure::Convergence(format!("{} (outputs were written)", langs.join(", "))).into())
}
