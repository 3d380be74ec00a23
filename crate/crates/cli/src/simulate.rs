use anyhow::Context;
use serde_json::json;
use tqa_core::synthetic::{generate_world, GenerativeModel, WorldConfig};

use crate::output::{input_error, unix_now, OutDir, RunManifest, Timing};
use crate::{load_config, Common};

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Number of languages.
    #[arg(long)]
    languages: Option<usize>,
    /// Translators per language.
    #[arg(long)]
    translators: Option<usize>,
    /// Reviewers per language.
    #[arg(long)]
    reviewers: Option<usize>,
    /// Jobs per language.
    #[arg(long)]
    jobs_per_language: Option<usize>,
    /// Generative model.
    #[arg(long, value_parser = ["hurdle", "gaussian"])]
    model: Option<String>,
}

pub fn run(common: &Common, args: Args) -> anyhow::Result<()> {
    let started = unix_now();
    let mut cfg: WorldConfig = load_config(common.config.as_deref())?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(v) = args.languages {
        cfg.n_languages = v;
    }
    if let Some(v) = args.translators {
        cfg.n_translators = v;
    }
    if let Some(v) = args.reviewers {
        cfg.n_reviewers = v;
    }
    if let Some(v) = args.jobs_per_language {
        cfg.n_jobs = v;
    }
    if let Some(m) = args.model.as_deref() {
        cfg.model = if m == "gaussian" {
            GenerativeModel::Gaussian
        } else {
            GenerativeModel::Hurdle
        };
    }
    cfg.validate().map_err(|e| input_error(format!("invalid world config: {e}")))?;

    let world = generate_world(&cfg)?;
    let mut out = OutDir::create(&common.out)?;
    world.save(out.root()).context("writing world files")?;
    for f in ["dataset.csv", "dataset_quantized.csv", "truth.csv", "labels.csv", "config.json"] {
        out.record(f);
    }
    eprintln!(
        "simulated {} jobs in {} languages (zero fraction {:.3}) into {}",
        world.dataset.len(),
        cfg.n_languages,
        world.dataset.zero_fraction(),
        out.root().display()
    );
    out.finish(RunManifest {
        command: "simulate".into(),
        tool_version: env!("CARGO_PKG_VERSION"),
        seed: cfg.seed,
        config: json!(cfg),
        inputs: common.config.iter().map(|p| p.display().to_string()).collect(),
        outputs: Vec::new(),
        warnings: Vec::new(),
        timing: Timing {
            started_unix: started,
            finished_unix: 0,
        },
    })
}
