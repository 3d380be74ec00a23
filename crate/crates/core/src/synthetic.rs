//! Synthetic review worlds with known parameters, for recovery checks.
//!
//! Each language gets its own translator and reviewer pools. A fraction of
//! the reviewers can reuse translator ids to create dual-role linguists.
//! Jobs pick a translator and a reviewer uniformly, redrawing the reviewer
//! when it coincides with the translator.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{spearman, write_labels, SkillLevel};
use crate::data_model::{Dataset, ErrorAnnotationCounts, ReviewRecord, TYPICAL_WORD_RANGE};
use crate::distributions::{Family, HurdleLognormal};
use crate::error::{Error, Result};
use crate::inference::{quantile_sorted, ChainSet};
use crate::model_hurdle::{sample_factor_product, HurdleFactor, HurdleModel, HurdleParams, HurdlePriors};
use crate::rng::RngStreams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GenerativeModel {
    #[default]
    Hurdle,
    Gaussian,
}

/// One number per skill level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerLevel {
    #[serde(rename = "L1")]
    pub l1: f64,
    #[serde(rename = "L2")]
    pub l2: f64,
    pub unknown: f64,
}

impl PerLevel {
    pub fn get(&self, level: SkillLevel) -> f64 {
        match level {
            SkillLevel::L1 => self.l1,
            SkillLevel::L2 => self.l2,
            SkillLevel::Unknown => self.unknown,
        }
    }
}

/// Skill-group composition and its effect on the true parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SkillDesign {
    /// Share of linguists at each level; must sum to 1.
    pub fractions: PerLevel,
    /// Added to a translator's `μ_t`.
    pub translator_mu_offset: PerLevel,
    /// Multiplies a reviewer's `σ_r`.
    pub reviewer_sigma_scale: PerLevel,
}

impl Default for SkillDesign {
    fn default() -> Self {
        Self {
            fractions: PerLevel {
                l1: 0.2,
                l2: 0.2,
                unknown: 0.6,
            },
            translator_mu_offset: PerLevel {
                l1: -0.5,
                l2: -0.25,
                unknown: 0.0,
            },
            reviewer_sigma_scale: PerLevel {
                l1: 1.0,
                l2: 1.0,
                unknown: 1.0,
            },
        }
    }
}

/// Where the base factor parameters come from, before skill adjustments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum ParamSource {
    /// Independent draws from the hurdle model's priors.
    #[default]
    Prior,
    /// The same values for every entity of a role.
    Fixed {
        language: HurdleFactor<f64>,
        translator: HurdleFactor<f64>,
        reviewer: HurdleFactor<f64>,
    },
}

/// Settings for the Gaussian generative process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaussianWorld {
    pub q_shape: f64,
    pub q_scale: f64,
    pub beta_sd: f64,
    pub sigma_sd: f64,
}

impl Default for GaussianWorld {
    fn default() -> Self {
        Self {
            q_shape: 1.0,
            q_scale: 3.0,
            beta_sd: 1.0,
            sigma_sd: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldConfig {
    pub seed: u64,
    pub model: GenerativeModel,
    pub n_languages: usize,
    /// Per language.
    pub n_translators: usize,
    /// Per language.
    pub n_reviewers: usize,
    /// Per language.
    pub n_jobs: usize,
    /// Share of each language's reviewers that reuse a translator id.
    pub dual_role_fraction: f64,
    pub skill: SkillDesign,
    pub params: ParamSource,
    pub gaussian: GaussianWorld,
    pub word_count_range: (u32, u32),
    /// Write the quantized annotation values as the primary dataset.
    pub fit_quantized: bool,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            model: GenerativeModel::Hurdle,
            n_languages: 3,
            n_translators: 30,
            n_reviewers: 10,
            n_jobs: 2000,
            dual_role_fraction: 0.0,
            skill: SkillDesign::default(),
            params: ParamSource::Prior,
            gaussian: GaussianWorld::default(),
            word_count_range: TYPICAL_WORD_RANGE,
            fit_quantized: false,
        }
    }
}

fn check_fractions(name: &str, f: &PerLevel) -> Result<()> {
    let all = [f.l1, f.l2, f.unknown];
    if all.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::Validation(format!("{name} entries must lie in [0, 1]")));
    }
    let sum: f64 = all.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Validation(format!("{name} must sum to 1 (got {sum})")));
    }
    Ok(())
}

impl WorldConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("n_languages", self.n_languages),
            ("n_translators", self.n_translators),
            ("n_reviewers", self.n_reviewers),
            ("n_jobs", self.n_jobs),
        ] {
            if v == 0 {
                return Err(Error::Validation(format!("{name} must be at least 1")));
            }
        }
        check_fractions("skill.fractions", &self.skill.fractions)?;
        let s = &self.skill.reviewer_sigma_scale;
        if [s.l1, s.l2, s.unknown].iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Validation("skill.reviewer_sigma_scale entries must be positive".into()));
        }
        let o = &self.skill.translator_mu_offset;
        if [o.l1, o.l2, o.unknown].iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("skill.translator_mu_offset entries must be finite".into()));
        }
        if !(0.0..=1.0).contains(&self.dual_role_fraction) {
            return Err(Error::Validation("dual_role_fraction must lie in [0, 1]".into()));
        }
        if self.n_dual() > self.n_translators {
            return Err(Error::Validation(
                "dual_role_fraction asks for more dual-role reviewers than there are translators".into(),
            ));
        }
        if self.n_reviewers == 1 && self.n_dual() == 1 {
            return Err(Error::Validation(
                "the only reviewer is also a translator, so that translator's jobs cannot be assigned".into(),
            ));
        }
        let (lo, hi) = self.word_count_range;
        if lo == 0 || lo > hi {
            return Err(Error::Validation("word_count_range must satisfy 1 <= low <= high".into()));
        }
        if let ParamSource::Fixed {
            language,
            translator,
            reviewer,
        } = &self.params
        {
            for f in [language, translator, reviewer] {
                f.validate()?;
            }
        }
        let g = &self.gaussian;
        if [g.q_shape, g.q_scale, g.beta_sd, g.sigma_sd].iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Validation("gaussian settings must be positive".into()));
        }
        Ok(())
    }

    fn n_dual(&self) -> usize {
        (self.dual_role_fraction * self.n_reviewers as f64).round() as usize
    }

    pub fn language_name(i: usize) -> String {
        format!("lang{i:02}")
    }
}

/// Levels for `n` linguists: rounded group counts in L1, L2, unknown order.
fn assign_levels(n: usize, f: &PerLevel) -> Vec<SkillLevel> {
    let n_l1 = (f.l1 * n as f64).round() as usize;
    let n_l2 = ((f.l2 * n as f64).round() as usize).min(n - n_l1.min(n));
    (0..n)
        .map(|i| {
            if i < n_l1 {
                SkillLevel::L1
            } else if i < n_l1 + n_l2 {
                SkillLevel::L2
            } else {
                SkillLevel::Unknown
            }
        })
        .collect()
}

/// True Gaussian-model parameters of one language.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianTruth {
    pub q: BTreeMap<String, f64>,
    pub beta: BTreeMap<String, f64>,
    pub sigma: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LanguageTruth {
    Hurdle(HurdleParams<f64>),
    Gaussian(GaussianTruth),
}

/// Everything generated for a world: true parameters, labels and datasets.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldTruth {
    pub config: WorldConfig,
    pub languages: BTreeMap<String, LanguageTruth>,
    pub labels: BTreeMap<String, SkillLevel>,
    /// Continuous EPT values.
    pub dataset: Dataset,
    /// The same jobs with integer annotation counts back-solved from EPT.
    pub quantized: Dataset,
}

impl WorldTruth {
    pub fn hurdle(&self, language: &str) -> Option<&HurdleParams<f64>> {
        match self.languages.get(language)? {
            LanguageTruth::Hurdle(p) => Some(p),
            LanguageTruth::Gaussian(_) => None,
        }
    }

    /// The dataset a fit should use, per `fit_quantized`.
    pub fn fit_dataset(&self) -> &Dataset {
        if self.config.fit_quantized {
            &self.quantized
        } else {
            &self.dataset
        }
    }

    /// Rows `(language, entity_id, role, pi, mu, sigma)`; Gaussian jobs use
    /// `mu` for `q` and reviewers `mu` for `β`.
    pub fn write_truth_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["language", "entity_id", "role", "pi", "mu", "sigma"])?;
        let num = |v: f64| v.to_string();
        for (lang, truth) in &self.languages {
            match truth {
                LanguageTruth::Hurdle(p) => {
                    let f = &p.language;
                    w.write_record([lang, lang, "language", &num(f.pi), &num(f.mu), &num(f.sigma)])?;
                    for (role, map) in [("translator", &p.translators), ("reviewer", &p.reviewers)] {
                        for (id, f) in map {
                            w.write_record([lang, id, role, &num(f.pi), &num(f.mu), &num(f.sigma)])?;
                        }
                    }
                }
                LanguageTruth::Gaussian(g) => {
                    for (job, q) in &g.q {
                        w.write_record([lang.as_str(), job, "job", "", &num(*q), ""])?;
                    }
                    for (id, b) in &g.beta {
                        w.write_record([lang.as_str(), id, "reviewer", "", &num(*b), &num(g.sigma[id])])?;
                    }
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Write `dataset.csv`, `dataset_quantized.csv`, `truth.csv`,
    /// `labels.csv` and `config.json` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        self.fit_dataset().save(dir.join("dataset.csv"))?;
        self.quantized.save(dir.join("dataset_quantized.csv"))?;
        self.write_truth_csv(BufWriter::new(File::create(dir.join("truth.csv"))?))?;
        write_labels(&self.labels, BufWriter::new(File::create(dir.join("labels.csv"))?))?;
        let mut cfg = serde_json::to_string_pretty(&self.config)?;
        cfg.push('\n');
        fs::write(dir.join("config.json"), cfg)?;
        Ok(())
    }
}

struct LanguageOutput {
    truth: LanguageTruth,
    records: Vec<ReviewRecord>,
    quantized: Vec<ReviewRecord>,
}

/// Back-solve integer counts for a continuous EPT: `k = round(e w / 1000)`
/// weighted errors, split into as many majors as possible.
pub fn quantize(ept: f64, word_count: u32) -> ErrorAnnotationCounts {
    let k = (ept * word_count as f64 / 1000.0).round() as u64;
    let major = k / 2;
    let minor = k % 2;
    ErrorAnnotationCounts::new(minor as u32, major as u32)
}

fn prior_factor<R: Rng + ?Sized>(rng: &mut R, pi_ab: (f64, f64), pr: &HurdlePriors<f64>) -> HurdleFactor<f64> {
    let pi = Family::Beta { a: pi_ab.0, b: pi_ab.1 }.sample_one(rng);
    let mu = Family::Normal { mean: 0.0, sd: pr.mu_sd }.sample_one(rng);
    let sigma = Family::truncated_normal_var(pr.sigma_mean, pr.sigma_variance).sample_one(rng);
    HurdleFactor {
        pi,
        mu,
        sigma: sigma.max(1e-6),
    }
}

fn generate_language(cfg: &WorldConfig, lang_idx: usize, streams: &RngStreams) -> Result<(LanguageOutput, Vec<(String, SkillLevel)>)> {
    let language = WorldConfig::language_name(lang_idx);
    let mut prng = streams.stream(&[lang_idx as u64, 0]);
    let mut jrng = streams.stream(&[lang_idx as u64, 1]);

    let translators: Vec<String> = (0..cfg.n_translators).map(|i| format!("{language}-t{i:03}")).collect();
    let n_dual = cfg.n_dual();
    let reviewers: Vec<String> = (0..cfg.n_reviewers)
        .map(|i| {
            if i < n_dual {
                translators[i].clone()
            } else {
                format!("{language}-r{i:03}")
            }
        })
        .collect();
    let t_levels = assign_levels(cfg.n_translators, &cfg.skill.fractions);
    let r_levels: Vec<SkillLevel> = {
        let own = assign_levels(cfg.n_reviewers - n_dual, &cfg.skill.fractions);
        t_levels[..n_dual].iter().copied().chain(own).collect()
    };
    let mut labels: Vec<(String, SkillLevel)> = translators.iter().cloned().zip(t_levels.iter().copied()).collect();
    labels.extend(reviewers[n_dual..].iter().cloned().zip(r_levels[n_dual..].iter().copied()));

    // job assignment, shared by both generative models
    let (lo, hi) = cfg.word_count_range;
    let jobs: Vec<(usize, usize, u32)> = (0..cfg.n_jobs)
        .map(|_| {
            let t = jrng.random_range(0..translators.len());
            let mut r = jrng.random_range(0..reviewers.len());
            while reviewers[r] == translators[t] {
                r = jrng.random_range(0..reviewers.len());
            }
            (t, r, jrng.random_range(lo..=hi))
        })
        .collect();
    let job_id = |j: usize| format!("{language}-j{j:05}");

    let (truth, epts) = match cfg.model {
        GenerativeModel::Hurdle => {
            let pr = HurdlePriors::<f64>::default();
            let (base_l, base_t, base_r) = match cfg.params {
                ParamSource::Prior => (None, None, None),
                ParamSource::Fixed {
                    language,
                    translator,
                    reviewer,
                } => (Some(language), Some(translator), Some(reviewer)),
            };
            let lang_f = base_l.unwrap_or_else(|| prior_factor(&mut prng, pr.pi_language, &pr));
            let mut tf: Vec<HurdleFactor<f64>> = (0..cfg.n_translators)
                .map(|_| base_t.unwrap_or_else(|| prior_factor(&mut prng, pr.pi_translator, &pr)))
                .collect();
            for (f, &lvl) in tf.iter_mut().zip(&t_levels) {
                f.mu += cfg.skill.translator_mu_offset.get(lvl);
            }
            let mut rf: Vec<HurdleFactor<f64>> = (0..cfg.n_reviewers)
                .map(|_| base_r.unwrap_or_else(|| prior_factor(&mut prng, pr.pi_reviewer, &pr)))
                .collect();
            for (f, &lvl) in rf.iter_mut().zip(&r_levels) {
                f.sigma *= cfg.skill.reviewer_sigma_scale.get(lvl);
            }
            let epts: Vec<f64> = jobs
                .iter()
                .map(|&(t, r, _)| sample_factor_product(&lang_f, &tf[t], &rf[r], &mut jrng))
                .collect();
            let params = HurdleParams {
                language: lang_f,
                translators: translators.iter().cloned().zip(tf).collect(),
                reviewers: reviewers.iter().cloned().zip(rf).collect(),
            };
            (LanguageTruth::Hurdle(params), epts)
        }
        GenerativeModel::Gaussian => {
            let g = &cfg.gaussian;
            let beta: Vec<f64> = (0..cfg.n_reviewers).map(|_| g.beta_sd * jrng.sample::<f64, _>(StandardNormal)).collect();
            let sigma: Vec<f64> = (0..cfg.n_reviewers)
                .zip(&r_levels)
                .map(|(_, &lvl)| {
                    let z: f64 = prng.sample(StandardNormal);
                    (g.sigma_sd * z.abs()).max(1e-6) * cfg.skill.reviewer_sigma_scale.get(lvl)
                })
                .collect();
            let q_dist = Family::Gamma {
                shape: g.q_shape,
                scale: g.q_scale,
            };
            let mut q = BTreeMap::new();
            let epts: Vec<f64> = jobs
                .iter()
                .enumerate()
                .map(|(j, &(_, r, _))| {
                    let qj = q_dist.sample_one(&mut jrng);
                    q.insert(job_id(j), qj);
                    let z: f64 = jrng.sample(StandardNormal);
                    // EPT cannot be negative; clip the Gaussian draw at zero
                    (qj + beta[r] + sigma[r] * z).max(0.0)
                })
                .collect();
            let truth = GaussianTruth {
                q,
                beta: reviewers.iter().cloned().zip(beta).collect(),
                sigma: reviewers.iter().cloned().zip(sigma).collect(),
            };
            (LanguageTruth::Gaussian(truth), epts)
        }
    };

    let mut records = Vec::with_capacity(cfg.n_jobs);
    let mut quantized = Vec::with_capacity(cfg.n_jobs);
    for (j, (&(t, r, w), &e)) in jobs.iter().zip(&epts).enumerate() {
        records.push(ReviewRecord::from_ept(job_id(j), &language, &translators[t], &reviewers[r], w, e)?);
        quantized.push(ReviewRecord::from_annotations(
            job_id(j),
            &language,
            &translators[t],
            &reviewers[r],
            w,
            quantize(e, w),
        )?);
    }
    Ok((
        LanguageOutput {
            truth,
            records,
            quantized,
        },
        labels,
    ))
}

/// Generate a world; bit-identical for identical configs.
pub fn generate_world(config: &WorldConfig) -> Result<WorldTruth> {
    config.validate()?;
    let streams = RngStreams::new(config.seed);
    let outputs: Vec<(LanguageOutput, Vec<(String, SkillLevel)>)> = (0..config.n_languages)
        .into_par_iter()
        .map(|l| generate_language(config, l, &streams))
        .collect::<Result<_>>()?;
    let mut languages = BTreeMap::new();
    let mut labels = BTreeMap::new();
    let mut records = Vec::new();
    let mut quantized = Vec::new();
    for (l, (out, lab)) in outputs.into_iter().enumerate() {
        languages.insert(WorldConfig::language_name(l), out.truth);
        labels.extend(lab);
        records.extend(out.records);
        quantized.extend(out.quantized);
    }
    Ok(WorldTruth {
        config: config.clone(),
        languages,
        labels,
        dataset: Dataset::new(records)?,
        quantized: Dataset::new(quantized)?,
    })
}

/// Recovery metrics for one parameter class (e.g. `mu_t`) of one language.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryRow {
    pub language: String,
    pub class: String,
    pub n: usize,
    /// `None` when ranks are all tied or fewer than 3 entities.
    pub spearman: Option<f64>,
    pub coverage: f64,
    pub rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub level: f64,
    pub rows: Vec<RecoveryRow>,
}

impl RecoveryReport {
    pub fn get(&self, language: &str, class: &str) -> Option<&RecoveryRow> {
        self.rows.iter().find(|r| r.language == language && r.class == class)
    }

    /// Coverage over every parameter of every language.
    pub fn overall_coverage(&self) -> f64 {
        let (hit, n) = self
            .rows
            .iter()
            .fold((0.0, 0usize), |(h, n), r| (h + r.coverage * r.n as f64, n + r.n));
        hit / n as f64
    }
}

fn class_of(name: &str) -> &str {
    name.split('[').next().unwrap_or(name)
}

/// True hurdle parameters keyed by the model's parameter names.
pub fn hurdle_truth_by_name(model: &HurdleModel<f64>, truth: &HurdleParams<f64>) -> Result<BTreeMap<String, f64>> {
    let names = model.param_names();
    let factors: Vec<&HurdleFactor<f64>> = std::iter::once(&truth.language)
        .chain(model.translator_ids().iter().map(|t| truth.translators.get(t)).collect::<Option<Vec<_>>>().ok_or_else(|| {
            Error::Structural("truth lacks a translator present in the data".into())
        })?)
        .chain(model.reviewer_ids().iter().map(|r| truth.reviewers.get(r)).collect::<Option<Vec<_>>>().ok_or_else(|| {
            Error::Structural("truth lacks a reviewer present in the data".into())
        })?)
        .collect();
    let values = factors.iter().flat_map(|f| [f.pi, f.mu, f.sigma]);
    Ok(names.into_iter().zip(values).collect())
}

/// Compare constrained hurdle fits against the world's true parameters.
///
/// Entities that drew no jobs in the data are skipped, since the model never
/// sees them.
pub fn recovery_report(truth: &WorldTruth, fits: &BTreeMap<String, ChainSet>, level: f64) -> Result<RecoveryReport> {
    let mut rows = Vec::new();
    let data = truth.fit_dataset();
    for (lang, draws) in fits {
        let params = truth
            .hurdle(lang)
            .ok_or_else(|| Error::Structural(format!("no hurdle truth for language {lang}")))?;
        let slice = data
            .language_slice(lang)
            .ok_or_else(|| Error::Structural(format!("language {lang} is not in the world")))?;
        let model = HurdleModel::<f64>::new(&slice)?;
        if draws.names() != model.param_names().as_slice() {
            return Err(Error::Structural(format!("draws for {lang} do not match the world's entities")));
        }
        let true_values = hurdle_truth_by_name(&model, params)?;
        let mut classes: BTreeMap<&str, (Vec<f64>, Vec<f64>, usize)> = BTreeMap::new();
        let alpha = (1.0 - level) / 2.0;
        for (p, name) in draws.names().iter().enumerate() {
            let t = true_values[name];
            let mut v: Vec<f64> = draws.param_chains(p).concat();
            v.sort_by(f64::total_cmp);
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            let covered = quantile_sorted(&v, alpha) <= t && t <= quantile_sorted(&v, 1.0 - alpha);
            let e = classes.entry(class_of(name)).or_default();
            e.0.push(t);
            e.1.push(mean);
            e.2 += covered as usize;
        }
        for (class, (t, m, hits)) in classes {
            let n = t.len();
            rows.push(RecoveryRow {
                language: lang.clone(),
                class: class.to_owned(),
                n,
                spearman: if n >= 3 { spearman(&t, &m) } else { None },
                coverage: hits as f64 / n as f64,
                rmse: (t.iter().zip(&m).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n as f64).sqrt(),
            });
        }
    }
    Ok(RecoveryReport { level, rows })
}

/// Expected EPT of every job under the true hurdle parameters:
/// `(1 - π_j) exp(μ_j + σ_j² / 2)`.
pub fn expected_ept(truth: &WorldTruth, language: &str) -> Result<BTreeMap<String, f64>> {
    let params = truth
        .hurdle(language)
        .ok_or_else(|| Error::Structural(format!("no hurdle truth for language {language}")))?;
    let slice = truth
        .fit_dataset()
        .language_slice(language)
        .ok_or_else(|| Error::Structural(format!("language {language} is not in the world")))?;
    slice
        .records()
        .iter()
        .map(|r| {
            let c = crate::model_hurdle::collapse(&params.language, &params.translators[&r.translator_id], &params.reviewers[&r.reviewer_id])?;
            let h = HurdleLognormal::new(c.pi, c.mu, c.sigma)?;
            Ok((r.job_id.clone(), (1.0 - h.pi) * (h.mu + 0.5 * h.sigma * h.sigma).exp()))
        })
        .collect()
}

/// Fraction of jobs whose Gaussian-model credible interval for the mean EPT
/// `q_j + β_r` contains the true expected EPT.
pub fn gaussian_mean_coverage(truth: &WorldTruth, language: &str, draws: &ChainSet, level: f64) -> Result<f64> {
    let expected = expected_ept(truth, language)?;
    let slice = truth.fit_dataset().language_slice(language).expect("checked by expected_ept");
    let alpha = (1.0 - level) / 2.0;
    let mut hits = 0usize;
    for r in slice.records() {
        let qi = draws
            .index_of(&format!("q[{}]", r.job_id))
            .ok_or_else(|| Error::Structural(format!("draws lack q[{}]", r.job_id)))?;
        let bi = draws
            .index_of(&format!("beta[{}]", r.reviewer_id))
            .ok_or_else(|| Error::Structural(format!("draws lack beta[{}]", r.reviewer_id)))?;
        let mut v: Vec<f64> = draws.iter_draws().map(|d| d[qi] + d[bi]).collect();
        v.sort_by(f64::total_cmp);
        let e = expected[&r.job_id];
        hits += (quantile_sorted(&v, alpha) <= e && e <= quantile_sorted(&v, 1.0 - alpha)) as usize;
    }
    Ok(hits as f64 / slice.len() as f64)
}
