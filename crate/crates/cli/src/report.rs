use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufReader;
use std::path::PathBuf;

use anyhow::Context;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tqa_core::analysis::{
    cross_features, group_summary, holding, pool_linguists, read_labels, write_group_csv, BootstrapConfig, Group,
    Grouping, LanguageEstimates, LinguistRole, LinguistSummary, Scatter, SCATTER_PLOTS,
};

use crate::fit::{FitSummary, ModelKind};
use crate::output::{input_error, read_input, unix_now, OutDir, RunManifest, Timing};
use crate::svg;
use crate::{load_config, Common};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    pub seed: u64,
    pub n_boot: usize,
    pub level: f64,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_boot: 10_000,
            level: 0.95,
        }
    }
}

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Directory holding a `hurdle/` fit.
    #[arg(long)]
    fit: PathBuf,
    /// CSV with columns linguist_id, level (L1|L2|unknown).
    #[arg(long)]
    labels: PathBuf,
    /// Bootstrap resamples (default 10000)
    #[arg(long)]
    n_boot: Option<usize>,
    /// Credible level of the bootstrap intervals (default 0.95)
    #[arg(long)]
    level: Option<f64>,
}

/// Per-language estimates from every `hurdle/<language>/summary.json`.
fn load_estimates(fit: &std::path::Path) -> anyhow::Result<Vec<LanguageEstimates>> {
    let dir = fit.join(ModelKind::Hurdle.dir());
    let entries = fs::read_dir(&dir).map_err(|e| input_error(format!("no hurdle fit in {}: {e}", dir.display())))?;
    let mut langs: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("summary.json").is_file())
        .collect();
    langs.sort();
    if langs.is_empty() {
        return Err(input_error(format!("no language summaries under {}", dir.display())));
    }
    langs
        .iter()
        .map(|p| {
            let path = p.join("summary.json");
            let s: FitSummary = serde_json::from_reader(BufReader::new(
                File::open(&path).with_context(|| format!("opening {}", path.display()))?,
            ))
            .map_err(|e| input_error(format!("invalid fit summary {}: {e}", path.display())))?;
            if !s.gate.accepted {
                eprintln!("warning: hurdle fit for {} did not pass the convergence gate", s.language);
            }
            Ok(LanguageEstimates::from_summaries(&s.language, &s.params, &s.entities)?)
        })
        .collect()
}

fn write_linguists(out: &mut OutDir, summaries: &[LinguistSummary]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(out.writer("linguists.csv")?);
    let mut header = vec!["linguist_id".to_string(), "level".to_string()];
    for r in ["t", "r"] {
        for c in ["n_jobs", "mean_ept", "pi", "mu", "sigma", "pi_sd", "mu_sd", "sigma_sd"] {
            header.push(format!("{c}_{r}"));
        }
    }
    w.write_record(&header)?;
    for s in summaries {
        let mut row = vec![s.linguist_id.clone(), s.level.to_string()];
        for e in [&s.translator, &s.reviewer] {
            match e {
                Some(e) => row.extend(
                    [e.n_jobs as f64, e.mean_ept, e.pi, e.mu, e.sigma, e.pi_sd, e.mu_sd, e.sigma_sd]
                        .iter()
                        .map(|v| v.to_string()),
                ),
                None => row.extend(std::iter::repeat_n(String::new(), 8)),
            }
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct GroupReport<'a> {
    level: f64,
    n_boot: usize,
    groups: &'a [tqa_core::analysis::GroupSummary],
    mu_t_mu_r_correlation: Option<f64>,
}

pub fn run(common: &Common, args: Args) -> anyhow::Result<()> {
    let started = unix_now();
    let mut cfg: ReportConfig = load_config(common.config.as_deref())?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(n) = args.n_boot {
        cfg.n_boot = n;
    }
    if let Some(l) = args.level {
        cfg.level = l;
    }
    if cfg.n_boot == 0 || !(cfg.level > 0.0 && cfg.level < 1.0) {
        return Err(input_error("n_boot must be >= 1 and level must lie in (0, 1)"));
    }
    let labels = read_input(&args.labels, "labels", |p| read_labels(File::open(p)?))?;
    let estimates = load_estimates(&args.fit)?;
    let (summaries, unmatched) = pool_linguists(&estimates, &labels);
    let mut warnings: Vec<String> = unmatched
        .iter()
        .map(|id| format!("label for unknown linguist {id:?} skipped"))
        .collect();
    for w in &warnings {
        eprintln!("warning: {w}");
    }

    let boot = BootstrapConfig {
        level: cfg.level,
        n_boot: cfg.n_boot,
        seed: cfg.seed,
    };
    let mut groups = Vec::new();
    for role in [LinguistRole::Translator, LinguistRole::Reviewer] {
        let members = holding(&summaries, role);
        if members.is_empty() {
            warnings.push(format!("no linguist acts as {role}"));
            continue;
        }
        for grouping in [Grouping::Levels, Grouping::Aggregated] {
            groups.extend(group_summary(&members, role, grouping, &boot)?);
        }
    }

    let mut out = OutDir::create(&common.out)?;
    write_linguists(&mut out, &summaries)?;
    write_group_csv(&groups, out.writer("groups.csv")?)?;
    let cross = cross_features(&summaries);
    out.write_json(
        "groups.json",
        &GroupReport {
            level: cfg.level,
            n_boot: cfg.n_boot,
            groups: &groups,
            mu_t_mu_r_correlation: cross.mu_correlation(),
        },
    )?;

    for (x, y) in SCATTER_PLOTS {
        let sc = Scatter::build(&summaries, x, y);
        let stem = sc.file_stem();
        sc.write_csv(out.writer(&format!("scatter/{stem}.csv"))?)?;
        sc.write_centroids_csv(out.writer(&format!("scatter/{stem}_centroids.csv"))?)?;
        let mut by_group: BTreeMap<Group, Vec<(f64, f64)>> = BTreeMap::new();
        for p in &sc.points {
            by_group.entry(p.group).or_default().push((p.x, p.y));
        }
        let plot_groups: Vec<svg::Group> = by_group
            .into_iter()
            .map(|(g, points)| svg::Group {
                label: g.name(),
                points,
                centroid: sc.centroids.iter().find(|c| c.group == g).map(|c| (c.x, c.y)),
            })
            .collect();
        out.write_text(
            &format!("scatter/{stem}.svg"),
            &svg::scatter(&format!("{} vs {}", sc.y_label, sc.x_label), &sc.x_label, &sc.y_label, &plot_groups),
        )?;
    }

    let mut w = csv::Writer::from_writer(out.writer("cross_features.csv")?);
    w.write_record(["linguist_id", "level", "mu_t", "mu_r", "sigma_t", "sigma_r"].map(String::from))?;
    for r in &cross.rows {
        w.write_record(&[
            r.linguist_id.clone(),
            r.level.to_string(),
            r.mu_t.to_string(),
            r.mu_r.to_string(),
            r.sigma_t.to_string(),
            r.sigma_r.to_string(),
        ])?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_writer(out.writer("cross_centroids.csv")?);
    w.write_record(["group", "n", "mu_t", "mu_r", "sigma_t", "sigma_r"].map(String::from))?;
    for c in &cross.centroids {
        w.write_record(&[
            c.group.name().to_string(),
            c.n.to_string(),
            c.mu_t.to_string(),
            c.mu_r.to_string(),
            c.sigma_t.to_string(),
            c.sigma_r.to_string(),
        ])?;
    }
    w.flush()?;

    eprintln!("report for {} linguists written to {}", summaries.len(), out.root().display());
    out.finish(RunManifest {
        command: "report".into(),
        tool_version: env!("CARGO_PKG_VERSION"),
        seed: cfg.seed,
        config: json!(cfg),
        inputs: vec![args.fit.display().to_string(), args.labels.display().to_string()],
        outputs: Vec::new(),
        warnings,
        timing: Timing {
            started_unix: started,
            finished_unix: 0,
        },
    })
}
