//! `tqa`: simulate review data, fit the Gaussian and hurdle models, run
//! posterior-predictive checks and build linguist reports.
//!
//! Exit codes: 0 success, 2 input or configuration error, 3 convergence gate
//! failure, 4 internal error.

mod fit;
mod output;
mod ppc;
mod report;
mod simulate;
mod svg;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;

use output::{exit_code, input_error};

#[derive(Parser, Debug)]
#[command(name = "tqa", version, about = "Bayesian reviewer-bias models for translation quality scores")]
struct Cli {
    /// Seed for every random stream of the run.
    #[arg(long, global = true, env = "TQA_SEED")]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, env = "TQA_OUT", default_value = "tqa-out")]
    out: PathBuf,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// JSON config for the subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic world with known parameters.
    Simulate(simulate::Args),
    /// Fit a model to every language of a dataset.
    Fit(fit::Args),
    /// Posterior-predictive checks of existing fits.
    Ppc(ppc::Args),
    /// Skill-group summaries and scatter plots from a hurdle fit.
    Report(report::Args),
}

/// Flags shared by all subcommands.
pub struct Common {
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub config: Option<PathBuf>,
}

/// Parse the subcommand's JSON config, or its defaults when none was given.
pub fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> anyhow::Result<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| input_error(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| input_error(format!("invalid config {}: {e}", path.display())))
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(input_error("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let common = Common {
        seed: cli.seed,
        out: cli.out,
        config: cli.config,
    };
    match cli.command {
        Command::Simulate(a) => simulate::run(&common, a),
        Command::Fit(a) => fit::run(&common, a),
        Command::Ppc(a) => ppc::run(&common, a),
        Command::Report(a) => report::run(&common, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
