//! Post-fit linguist analytics: skill groups, bootstrap intervals, scatter
//! exports and rank recovery.
//!
//! Interpretation directions are fixed: lower `μ_t` means a more skilled
//! translator, higher `π_t` a higher propensity for perfect work, and lower
//! `σ` a more consistent linguist in either role.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data_model::Dataset;
use crate::error::{Error, Result};
use crate::inference::{quantile_sorted, ParamSummary};
use crate::rng::RngStreams;

/// Certification level of a linguist.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
pub enum SkillLevel {
    L1,
    L2,
    #[default]
    #[serde(rename = "unknown")]
    Unknown,
}

impl SkillLevel {
    pub fn is_skilled(self) -> bool {
        self != SkillLevel::Unknown
    }
}

impl fmt::Display for SkillLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SkillLevel::L1 => "L1",
            SkillLevel::L2 => "L2",
            SkillLevel::Unknown => "unknown",
        })
    }
}

impl FromStr for SkillLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "L1" | "l1" => Ok(SkillLevel::L1),
            "L2" | "l2" => Ok(SkillLevel::L2),
            "unknown" | "" => Ok(SkillLevel::Unknown),
            other => Err(Error::Validation(format!("unknown skill level {other:?}"))),
        }
    }
}

/// A level together with the roles the linguist actually holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkillLabel {
    pub level: SkillLevel,
    pub acts_as_translator: bool,
    pub acts_as_reviewer: bool,
}

impl SkillLabel {
    pub fn new(level: SkillLevel, acts_as_translator: bool, acts_as_reviewer: bool) -> Result<Self> {
        if !acts_as_translator && !acts_as_reviewer {
            return Err(Error::Validation("a linguist must hold at least one role".into()));
        }
        Ok(Self {
            level,
            acts_as_translator,
            acts_as_reviewer,
        })
    }
}

#[derive(Debug, Deserialize)]
struct LabelRow {
    linguist_id: String,
    level: String,
}

/// Read a `linguist_id,level` CSV. Later rows win on duplicate ids.
pub fn read_labels<R: Read>(reader: R) -> Result<BTreeMap<String, SkillLevel>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = BTreeMap::new();
    for row in rdr.deserialize::<LabelRow>() {
        let row = row?;
        out.insert(row.linguist_id, row.level.parse()?);
    }
    Ok(out)
}

pub fn write_labels<W: Write>(labels: &BTreeMap<String, SkillLevel>, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["linguist_id", "level"])?;
    for (id, level) in labels {
        w.write_record([id.as_str(), &level.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinguistRole {
    Translator,
    Reviewer,
}

impl LinguistRole {
    pub fn suffix(self) -> &'static str {
        match self {
            LinguistRole::Translator => "t",
            LinguistRole::Reviewer => "r",
        }
    }
}

impl fmt::Display for LinguistRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LinguistRole::Translator => "translator",
            LinguistRole::Reviewer => "reviewer",
        })
    }
}

/// Job count and mean observed EPT of one entity in one role.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntityStats {
    pub n_jobs: usize,
    pub mean_ept: f64,
}

/// Per-role job statistics of a language slice.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SliceStats {
    pub translators: BTreeMap<String, EntityStats>,
    pub reviewers: BTreeMap<String, EntityStats>,
}

impl SliceStats {
    pub fn from_dataset(ds: &Dataset) -> Self {
        let stats = |jobs: &[usize]| EntityStats {
            n_jobs: jobs.len(),
            mean_ept: jobs.iter().map(|&j| ds.records()[j].ept).sum::<f64>() / jobs.len() as f64,
        };
        Self {
            translators: ds.translators().map(|t| (t.to_owned(), stats(ds.jobs_of_translator(t)))).collect(),
            reviewers: ds.reviewers().map(|r| (r.to_owned(), stats(ds.jobs_of_reviewer(r)))).collect(),
        }
    }

    fn role(&self, role: LinguistRole) -> &BTreeMap<String, EntityStats> {
        match role {
            LinguistRole::Translator => &self.translators,
            LinguistRole::Reviewer => &self.reviewers,
        }
    }
}

/// Posterior means (and sds) of one linguist's factor in one role.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoleEstimate {
    pub n_jobs: usize,
    pub mean_ept: f64,
    pub pi: f64,
    pub mu: f64,
    pub sigma: f64,
    pub pi_sd: f64,
    pub mu_sd: f64,
    pub sigma_sd: f64,
}

/// Hurdle-model estimates for every linguist of one language.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanguageEstimates {
    pub language: String,
    pub translators: BTreeMap<String, RoleEstimate>,
    pub reviewers: BTreeMap<String, RoleEstimate>,
}

impl LanguageEstimates {
    /// Assemble from hurdle parameter summaries named `pi_t[id]`, `mu_r[id]`, ...
    pub fn from_summaries(language: &str, params: &[ParamSummary], stats: &SliceStats) -> Result<Self> {
        let by_name: BTreeMap<&str, &ParamSummary> = params.iter().map(|p| (p.name.as_str(), p)).collect();
        let role = |role: LinguistRole| -> Result<BTreeMap<String, RoleEstimate>> {
            let s = role.suffix();
            stats
                .role(role)
                .iter()
                .map(|(id, st)| {
                    let get = |p: &str| {
                        by_name.get(format!("{p}_{s}[{id}]").as_str()).copied().ok_or_else(|| {
                            Error::Structural(format!("summary for {language} lacks {p}_{s}[{id}]"))
                        })
                    };
                    let (pi, mu, sigma) = (get("pi")?, get("mu")?, get("sigma")?);
                    Ok((
                        id.clone(),
                        RoleEstimate {
                            n_jobs: st.n_jobs,
                            mean_ept: st.mean_ept,
                            pi: pi.mean,
                            mu: mu.mean,
                            sigma: sigma.mean,
                            pi_sd: pi.sd,
                            mu_sd: mu.sd,
                            sigma_sd: sigma.sd,
                        },
                    ))
                })
                .collect()
        };
        Ok(Self {
            language: language.to_owned(),
            translators: role(LinguistRole::Translator)?,
            reviewers: role(LinguistRole::Reviewer)?,
        })
    }

    fn role(&self, role: LinguistRole) -> &BTreeMap<String, RoleEstimate> {
        match role {
            LinguistRole::Translator => &self.translators,
            LinguistRole::Reviewer => &self.reviewers,
        }
    }
}

/// One linguist's estimates pooled across languages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinguistSummary {
    pub linguist_id: String,
    pub level: SkillLevel,
    pub translator: Option<RoleEstimate>,
    pub reviewer: Option<RoleEstimate>,
}

impl LinguistSummary {
    pub fn role(&self, role: LinguistRole) -> Option<&RoleEstimate> {
        match role {
            LinguistRole::Translator => self.translator.as_ref(),
            LinguistRole::Reviewer => self.reviewer.as_ref(),
        }
    }

    pub fn label(&self) -> SkillLabel {
        SkillLabel {
            level: self.level,
            acts_as_translator: self.translator.is_some(),
            acts_as_reviewer: self.reviewer.is_some(),
        }
    }

    pub fn is_dual_role(&self) -> bool {
        self.translator.is_some() && self.reviewer.is_some()
    }
}

fn pool(estimates: &[RoleEstimate]) -> Option<RoleEstimate> {
    let n: usize = estimates.iter().map(|e| e.n_jobs).sum();
    if estimates.is_empty() || n == 0 {
        return None;
    }
    let w = |f: fn(&RoleEstimate) -> f64| estimates.iter().map(|e| e.n_jobs as f64 * f(e)).sum::<f64>() / n as f64;
    Some(RoleEstimate {
        n_jobs: n,
        mean_ept: w(|e| e.mean_ept),
        pi: w(|e| e.pi),
        mu: w(|e| e.mu),
        sigma: w(|e| e.sigma),
        pi_sd: w(|e| e.pi_sd),
        mu_sd: w(|e| e.mu_sd),
        sigma_sd: w(|e| e.sigma_sd),
    })
}

/// Pool per-language estimates into one summary per linguist, weighting each
/// language by the linguist's job count there. Unlabelled linguists are
/// `unknown`; returns the summaries and the label ids that matched nobody.
pub fn pool_linguists(
    languages: &[LanguageEstimates],
    labels: &BTreeMap<String, SkillLevel>,
) -> (Vec<LinguistSummary>, Vec<String>) {
    let mut per: BTreeMap<&str, [Vec<RoleEstimate>; 2]> = BTreeMap::new();
    for lang in languages {
        for (i, role) in [LinguistRole::Translator, LinguistRole::Reviewer].into_iter().enumerate() {
            for (id, e) in lang.role(role) {
                per.entry(id.as_str()).or_default()[i].push(*e);
            }
        }
    }
    let unmatched = labels.keys().filter(|id| !per.contains_key(id.as_str())).cloned().collect();
    let summaries = per
        .into_iter()
        .map(|(id, [t, r])| LinguistSummary {
            linguist_id: id.to_owned(),
            level: labels.get(id).copied().unwrap_or_default(),
            translator: pool(&t),
            reviewer: pool(&r),
        })
        .collect();
    (summaries, unmatched)
}

/// Percentile bootstrap interval of the mean. Resample `b` draws from stream
/// `[b]` of `streams`, so the result does not depend on thread count.
pub fn bootstrap_ci(values: &[f64], level: f64, n_boot: usize, streams: &RngStreams) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::InsufficientData("bootstrap needs at least one value".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!("confidence level {level} must lie in (0, 1)")));
    }
    if n_boot == 0 {
        return Err(Error::Validation("n_boot must be at least 1".into()));
    }
    let n = values.len();
    let mut means: Vec<f64> = (0..n_boot)
        .into_par_iter()
        .map(|b| {
            let mut rng = streams.stream(&[b as u64]);
            (0..n).map(|_| values[rng.random_range(0..n)]).sum::<f64>() / n as f64
        })
        .collect();
    means.sort_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    Ok((quantile_sorted(&means, alpha), quantile_sorted(&means, 1.0 - alpha)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grouping {
    /// L1, L2, unknown holding both roles, unknown holding one role.
    Levels,
    /// Skilled (L1 and L2 together) against unknown.
    Aggregated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    #[serde(rename = "L1")]
    L1,
    #[serde(rename = "L2")]
    L2,
    UnknownBoth,
    UnknownSingle,
    Skilled,
    Unknown,
}

impl Group {
    pub fn of(summary: &LinguistSummary, grouping: Grouping) -> Group {
        match (grouping, summary.level) {
            (Grouping::Aggregated, l) if l.is_skilled() => Group::Skilled,
            (Grouping::Aggregated, _) => Group::Unknown,
            (Grouping::Levels, SkillLevel::L1) => Group::L1,
            (Grouping::Levels, SkillLevel::L2) => Group::L2,
            (Grouping::Levels, SkillLevel::Unknown) if summary.is_dual_role() => Group::UnknownBoth,
            (Grouping::Levels, SkillLevel::Unknown) => Group::UnknownSingle,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Group::L1 => "L1",
            Group::L2 => "L2",
            Group::UnknownBoth => "unknown_both",
            Group::UnknownSingle => "unknown_single",
            Group::Skilled => "skilled",
            Group::Unknown => "unknown",
        }
    }
}

/// Group mean with its bootstrap interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub mean: f64,
    pub low: f64,
    pub high: f64,
}

impl Interval {
    pub fn overlaps(&self, other: &Interval) -> bool {
        self.low <= other.high && other.low <= self.high
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub role: LinguistRole,
    pub group: Group,
    pub n_linguists: usize,
    pub mean_ept: Interval,
    pub pi: Interval,
    pub mu: Interval,
    pub sigma: Interval,
}

/// Bootstrap settings for [`group_summary`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub level: f64,
    pub n_boot: usize,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            level: 0.95,
            n_boot: 10_000,
            seed: 0,
        }
    }
}

/// Linguists holding `role`.
pub fn holding(summaries: &[LinguistSummary], role: LinguistRole) -> Vec<LinguistSummary> {
    summaries.iter().filter(|s| s.role(role).is_some()).cloned().collect()
}

/// Per-group means of the per-linguist posterior means, with bootstrap CIs.
/// Groups without members are left out.
pub fn group_summary(
    summaries: &[LinguistSummary],
    role: LinguistRole,
    grouping: Grouping,
    boot: &BootstrapConfig,
) -> Result<Vec<GroupSummary>> {
    if let Some(s) = summaries.iter().find(|s| s.role(role).is_none()) {
        return Err(Error::Structural(format!("{} does not act as {role}", s.linguist_id)));
    }
    let mut groups: BTreeMap<Group, Vec<RoleEstimate>> = BTreeMap::new();
    for s in summaries {
        groups.entry(Group::of(s, grouping)).or_default().push(*s.role(role).expect("checked"));
    }
    let streams = RngStreams::new(boot.seed);
    groups
        .into_iter()
        .map(|(group, members)| {
            // membership order must not matter, so bootstrap sorted values
            let interval = |k: u64, f: fn(&RoleEstimate) -> f64| -> Result<Interval> {
                let mut v: Vec<f64> = members.iter().map(f).collect();
                v.sort_by(f64::total_cmp);
                let s = streams.split(role as u64).split(group as u64).split(k);
                let (low, high) = bootstrap_ci(&v, boot.level, boot.n_boot, &s)?;
                Ok(Interval {
                    mean: v.iter().sum::<f64>() / v.len() as f64,
                    low,
                    high,
                })
            };
            Ok(GroupSummary {
                role,
                group,
                n_linguists: members.len(),
                mean_ept: interval(0, |e| e.mean_ept)?,
                pi: interval(1, |e| e.pi)?,
                mu: interval(2, |e| e.mu)?,
                sigma: interval(3, |e| e.sigma)?,
            })
        })
        .collect()
}

pub fn write_group_csv<W: Write>(rows: &[GroupSummary], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "role", "group", "n_linguists", "ept_mean", "ept_low", "ept_high", "pi_mean", "pi_low", "pi_high",
        "mu_mean", "mu_low", "mu_high", "sigma_mean", "sigma_low", "sigma_high",
    ])?;
    for r in rows {
        let mut rec = vec![r.role.to_string(), r.group.name().to_string(), r.n_linguists.to_string()];
        for i in [r.mean_ept, r.pi, r.mu, r.sigma] {
            rec.extend([i.mean.to_string(), i.low.to_string(), i.high.to_string()]);
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// A factor parameter of one role, used as a scatter axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Axis {
    pub role: LinguistRole,
    pub param: Param,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Param {
    Pi,
    Mu,
    Sigma,
}

impl Axis {
    pub const fn new(role: LinguistRole, param: Param) -> Self {
        Self { role, param }
    }

    pub fn label(&self) -> String {
        let p = match self.param {
            Param::Pi => "pi",
            Param::Mu => "mu",
            Param::Sigma => "sigma",
        };
        format!("{p}_{}", self.role.suffix())
    }

    pub fn value(&self, s: &LinguistSummary) -> Option<f64> {
        s.role(self.role).map(|e| match self.param {
            Param::Pi => e.pi,
            Param::Mu => e.mu,
            Param::Sigma => e.sigma,
        })
    }
}

use LinguistRole::{Reviewer as R, Translator as T};

/// The six standard plots as `(x, y)` axes.
pub const SCATTER_PLOTS: [(Axis, Axis); 6] = [
    (Axis::new(T, Param::Pi), Axis::new(T, Param::Mu)),
    (Axis::new(T, Param::Sigma), Axis::new(T, Param::Mu)),
    (Axis::new(R, Param::Mu), Axis::new(R, Param::Pi)),
    (Axis::new(R, Param::Sigma), Axis::new(R, Param::Mu)),
    (Axis::new(R, Param::Mu), Axis::new(T, Param::Mu)),
    (Axis::new(R, Param::Sigma), Axis::new(T, Param::Sigma)),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterPoint {
    pub linguist_id: String,
    pub group: Group,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Centroid {
    pub group: Group,
    pub n: usize,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scatter {
    pub x_label: String,
    pub y_label: String,
    pub points: Vec<ScatterPoint>,
    pub centroids: Vec<Centroid>,
}

impl Scatter {
    /// Points for every linguist with both coordinates; unweighted centroids
    /// per [`Grouping::Levels`] group.
    pub fn build(summaries: &[LinguistSummary], x: Axis, y: Axis) -> Self {
        let points: Vec<ScatterPoint> = summaries
            .iter()
            .filter_map(|s| {
                Some(ScatterPoint {
                    linguist_id: s.linguist_id.clone(),
                    group: Group::of(s, Grouping::Levels),
                    x: x.value(s)?,
                    y: y.value(s)?,
                })
            })
            .collect();
        let mut acc: BTreeMap<Group, (usize, f64, f64)> = BTreeMap::new();
        for p in &points {
            let e = acc.entry(p.group).or_insert((0, 0.0, 0.0));
            *e = (e.0 + 1, e.1 + p.x, e.2 + p.y);
        }
        let centroids = acc
            .into_iter()
            .map(|(group, (n, sx, sy))| Centroid {
                group,
                n,
                x: sx / n as f64,
                y: sy / n as f64,
            })
            .collect();
        Self {
            x_label: x.label(),
            y_label: y.label(),
            points,
            centroids,
        }
    }

    pub fn file_stem(&self) -> String {
        format!("scatter_{}_vs_{}", self.y_label, self.x_label)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["linguist_id", "group", &self.x_label, &self.y_label])?;
        for p in &self.points {
            w.write_record([p.linguist_id.as_str(), p.group.name(), &p.x.to_string(), &p.y.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_centroids_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["group", "n", &self.x_label, &self.y_label])?;
        for c in &self.centroids {
            w.write_record([c.group.name(), &c.n.to_string(), &c.x.to_string(), &c.y.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossRow {
    pub linguist_id: String,
    pub level: SkillLevel,
    pub mu_t: f64,
    pub mu_r: f64,
    pub sigma_t: f64,
    pub sigma_r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossCentroid {
    pub group: Group,
    pub n: usize,
    pub mu_t: f64,
    pub mu_r: f64,
    pub sigma_t: f64,
    pub sigma_r: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CrossFeatures {
    pub rows: Vec<CrossRow>,
    pub centroids: Vec<CrossCentroid>,
}

impl CrossFeatures {
    /// Pearson correlation of `μ_t` and `μ_r` over the dual-role rows.
    pub fn mu_correlation(&self) -> Option<f64> {
        let x: Vec<f64> = self.rows.iter().map(|r| r.mu_t).collect();
        let y: Vec<f64> = self.rows.iter().map(|r| r.mu_r).collect();
        pearson(&x, &y)
    }
}

/// Rows for linguists acting in both roles, plus per-group centroids.
pub fn cross_features(summaries: &[LinguistSummary]) -> CrossFeatures {
    let mut out = CrossFeatures::default();
    let mut acc: BTreeMap<Group, Vec<usize>> = BTreeMap::new();
    for s in summaries {
        if let (Some(t), Some(r)) = (&s.translator, &s.reviewer) {
            acc.entry(Group::of(s, Grouping::Levels)).or_default().push(out.rows.len());
            out.rows.push(CrossRow {
                linguist_id: s.linguist_id.clone(),
                level: s.level,
                mu_t: t.mu,
                mu_r: r.mu,
                sigma_t: t.sigma,
                sigma_r: r.sigma,
            });
        }
    }
    out.centroids = acc
        .into_iter()
        .map(|(group, idx)| {
            let n = idx.len() as f64;
            let m = |f: fn(&CrossRow) -> f64| idx.iter().map(|&i| f(&out.rows[i])).sum::<f64>() / n;
            CrossCentroid {
                group,
                n: idx.len(),
                mu_t: m(|r| r.mu_t),
                mu_r: m(|r| r.mu_r),
                sigma_t: m(|r| r.sigma_t),
                sigma_r: m(|r| r.sigma_r),
            }
        })
        .collect();
    out
}

/// Average ranks (1-based), ties sharing the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    if n != y.len() || n < 2 {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman ρ; `None` when either side is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Spearman ρ over the keys present in both maps.
pub fn skill_rank_recovery(recovered: &BTreeMap<String, f64>, truth: &BTreeMap<String, f64>) -> Result<f64> {
    let (x, y): (Vec<f64>, Vec<f64>) = recovered
        .iter()
        .filter_map(|(k, &v)| truth.get(k).map(|&t| (v, t)))
        .unzip();
    if x.len() < 3 {
        return Err(Error::InsufficientData(format!("{} common linguists, need at least 3", x.len())));
    }
    spearman(&x, &y).ok_or_else(|| Error::DiagnosticUndefined("all ranks tied".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn est(mu: f64, sigma: f64, n_jobs: usize) -> RoleEstimate {
        RoleEstimate {
            n_jobs,
            mean_ept: 1.0,
            pi: 0.2,
            mu,
            sigma,
            pi_sd: 0.0,
            mu_sd: 0.0,
            sigma_sd: 0.0,
        }
    }

    fn linguist(id: &str, level: SkillLevel, t: Option<f64>, r: Option<f64>) -> LinguistSummary {
        LinguistSummary {
            linguist_id: id.into(),
            level,
            translator: t.map(|m| est(m, 0.5, 10)),
            reviewer: r.map(|m| est(m, 0.4, 10)),
        }
    }

    #[test]
    fn bootstrap_constant_is_degenerate() {
        let (lo, hi) = bootstrap_ci(&[2.5; 3], 0.95, 500, &RngStreams::new(1)).unwrap();
        assert_eq!((lo, hi), (2.5, 2.5));
        assert!(bootstrap_ci(&[], 0.95, 10, &RngStreams::new(1)).is_err());
    }

    #[test]
    fn bootstrap_normal_clt() {
        let mut rng = RngStreams::new(3).stream(&[0]);
        let d = Normal::new(5.0, 1.0).unwrap();
        let v: Vec<f64> = (0..10_000).map(|_| d.sample(&mut rng)).collect();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let (lo, hi) = bootstrap_ci(&v, 0.95, 2000, &RngStreams::new(4)).unwrap();
        // endpoints sit 1.96 standard errors from the sample mean
        assert!((lo - (mean - 0.0196)).abs() < 0.002, "{lo} {mean}");
        assert!((hi - (mean + 0.0196)).abs() < 0.002, "{hi} {mean}");
        assert!((lo - (5.0 - 0.0196)).abs() < 0.01);
        assert!((hi - (5.0 + 0.0196)).abs() < 0.01);
    }

    #[test]
    fn bootstrap_levels_nest() {
        let v: Vec<f64> = (0..50).map(|i| ((i * 37) % 11) as f64).collect();
        let s = RngStreams::new(8);
        let (a, b) = bootstrap_ci(&v, 0.95, 3000, &s).unwrap();
        let (c, d) = bootstrap_ci(&v, 0.99, 3000, &s).unwrap();
        assert!(c <= a && b <= d);
    }

    #[test]
    fn groups_and_singletons() {
        let s = vec![
            linguist("a", SkillLevel::L1, Some(-1.0), None),
            linguist("b", SkillLevel::Unknown, Some(0.5), Some(0.1)),
            linguist("c", SkillLevel::Unknown, Some(0.7), None),
        ];
        let boot = BootstrapConfig {
            n_boot: 200,
            ..Default::default()
        };
        let g = group_summary(&s, LinguistRole::Translator, Grouping::Levels, &boot).unwrap();
        assert_eq!(g.len(), 3);
        assert_eq!(g[0].group, Group::L1);
        assert_eq!((g[0].mu.mean, g[0].mu.low, g[0].mu.high), (-1.0, -1.0, -1.0));
        assert_eq!(g[1].group, Group::UnknownBoth);
        let agg = group_summary(&s, LinguistRole::Translator, Grouping::Aggregated, &boot).unwrap();
        assert_eq!(agg.iter().map(|g| g.group).collect::<Vec<_>>(), vec![Group::Skilled, Group::Unknown]);
        assert!(group_summary(&s, LinguistRole::Reviewer, Grouping::Levels, &boot).is_err());
    }

    #[test]
    fn group_summary_ignores_order() {
        let mut s: Vec<LinguistSummary> = (0..7)
            .map(|i| linguist(&format!("x{i}"), SkillLevel::Unknown, Some(i as f64 * 0.3), None))
            .collect();
        let boot = BootstrapConfig {
            n_boot: 300,
            ..Default::default()
        };
        let a = group_summary(&s, LinguistRole::Translator, Grouping::Aggregated, &boot).unwrap();
        s.reverse();
        let b = group_summary(&s, LinguistRole::Translator, Grouping::Aggregated, &boot).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn pooling_weights_by_jobs() {
        let mk = |lang: &str, mu: f64, n: usize| LanguageEstimates {
            language: lang.into(),
            translators: [("a".to_string(), est(mu, 0.5, n))].into(),
            reviewers: BTreeMap::new(),
        };
        let labels = [("a".to_string(), SkillLevel::L2), ("ghost".to_string(), SkillLevel::L1)].into();
        let (s, unmatched) = pool_linguists(&[mk("x", 1.0, 30), mk("y", -1.0, 10)], &labels);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].level, SkillLevel::L2);
        assert!((s[0].translator.unwrap().mu - 0.5).abs() < 1e-12);
        assert_eq!(s[0].translator.unwrap().n_jobs, 40);
        assert_eq!(unmatched, vec!["ghost".to_string()]);
    }

    #[test]
    fn cross_feature_rows() {
        assert!(cross_features(&[linguist("a", SkillLevel::L1, Some(0.1), None)]).rows.is_empty());
        let c = cross_features(&[linguist("d", SkillLevel::L2, Some(-0.3), Some(0.2))]);
        assert_eq!(c.rows.len(), 1);
        assert_eq!((c.rows[0].mu_t, c.rows[0].mu_r), (-0.3, 0.2));
        assert_eq!(c.centroids.len(), 1);
    }

    #[test]
    fn spearman_examples() {
        let m = |v: &[f64]| -> BTreeMap<String, f64> { v.iter().enumerate().map(|(i, &x)| (format!("k{i}"), x)).collect() };
        let a = m(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(skill_rank_recovery(&a, &a).unwrap(), 1.0);
        assert_eq!(skill_rank_recovery(&a, &m(&[4.0, 3.0, 2.0, 1.0])).unwrap(), -1.0);
        assert!(matches!(skill_rank_recovery(&a, &m(&[1.0, 1.0, 1.0, 1.0])), Err(Error::DiagnosticUndefined(_))));
        assert!(skill_rank_recovery(&m(&[1.0, 2.0]), &m(&[1.0, 2.0])).is_err());
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn labels_roundtrip() {
        let csv = "linguist_id,level\nann,L1\nbob, L2\ncy,unknown\n";
        let labels = read_labels(csv.as_bytes()).unwrap();
        assert_eq!(labels["bob"], SkillLevel::L2);
        let mut buf = Vec::new();
        write_labels(&labels, &mut buf).unwrap();
        assert_eq!(read_labels(buf.as_slice()).unwrap(), labels);
        assert!(read_labels("linguist_id,level\nx,L3\n".as_bytes()).is_err());
        assert!(read_labels("linguist_id,level\n".as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn skill_label_needs_role() {
        assert!(SkillLabel::new(SkillLevel::L1, false, false).is_err());
    }

    #[test]
    fn scatter_centroids() {
        let s = vec![
            linguist("a", SkillLevel::L1, Some(-1.0), Some(0.0)),
            linguist("b", SkillLevel::L1, Some(-3.0), Some(2.0)),
            linguist("c", SkillLevel::Unknown, Some(1.0), None),
        ];
        let (x, y) = SCATTER_PLOTS[4];
        let sc = Scatter::build(&s, x, y);
        assert_eq!(sc.points.len(), 2);
        assert_eq!(sc.centroids.len(), 1);
        assert_eq!((sc.centroids[0].x, sc.centroids[0].y), (1.0, -2.0));
        assert_eq!(sc.file_stem(), "scatter_mu_t_vs_mu_r");
    }
}
