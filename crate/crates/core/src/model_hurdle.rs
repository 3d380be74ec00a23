//! Collapsed hurdle-lognormal factor model, fitted per language pair.
//!
//! Each job's score is the product of a language difficulty `d_l`, a
//! translator error propensity `ε_t` and a reviewer bias `β_r`, each
//! hurdle-lognormal with its own `(π, μ, σ)`. Because products of independent
//! Bernoulli and lognormal variables stay in those families, the job-level
//! distribution collapses to a single hurdle-lognormal:
//!
//! ```text
//! π_j  = 1 - (1 - π_l)(1 - π_t)(1 - π_r)
//! μ_j  = μ_l + μ_t + μ_r
//! σ_j² = σ_l² + σ_t² + σ_r²
//! ```
//!
//! Priors: `π ~ Beta` (per role, see [`HurdlePriors`]), `μ ~ N(0, 1)`,
//! `σ ~ N(0.5, 0.25)` truncated to `σ > 0` (second argument a variance).
//! Only the zero-centred priors tie down the additive `μ_l + μ_t + μ_r`
//! direction; no sum-to-zero constraint is imposed.
//!
//! Unconstrained packing: `(logit π, μ, ln σ)` for the language, then each
//! translator, then each reviewer, entities in sorted id order.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data_model::Dataset;
use crate::distributions::{beta_ln_pdf, hurdle_ln_pdf, normal_ln_pdf, truncated_normal_ln_pdf, HurdleLognormal};
use crate::error::{domain, Error, Result};
use crate::inference::{ChainSet, LogDensity};
use crate::model_gaussian::draw_index;
use crate::rng::RngStreams;
use crate::scalar::{half_ln_two_pi, ln_beta, log1mexp, logit, sigmoid, softplus, Real};

/// `(π, μ, σ)` of one multiplicative factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HurdleFactor<T> {
    pub pi: T,
    pub mu: T,
    pub sigma: T,
}

impl<T: Real> HurdleFactor<T> {
    pub fn new(pi: T, mu: T, sigma: T) -> Result<Self> {
        let f = Self { pi, mu, sigma };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        HurdleLognormal::new(self.pi, self.mu, self.sigma).map(|_| ())
    }

    /// One draw of the factor: exact zero with probability `π`, else lognormal.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        HurdleLognormal {
            pi: self.pi,
            mu: self.mu,
            sigma: self.sigma,
        }
        .sample_one(rng)
        .f64()
    }
}

/// Job-level hurdle parameters after collapsing the three factors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollapsedJob<T> {
    pub pi: T,
    pub mu: T,
    pub sigma: T,
}

impl<T: Real> CollapsedJob<T> {
    pub fn as_hurdle(&self) -> HurdleLognormal<T> {
        HurdleLognormal {
            pi: self.pi,
            mu: self.mu,
            sigma: self.sigma,
        }
    }
}

/// Collapse language, translator and reviewer factors into the job's hurdle.
pub fn collapse<T: Real>(
    lang: &HurdleFactor<T>,
    trans: &HurdleFactor<T>,
    rev: &HurdleFactor<T>,
) -> Result<CollapsedJob<T>> {
    lang.validate()?;
    trans.validate()?;
    rev.validate()?;
    Ok(collapse_unchecked(lang, trans, rev))
}

#[inline]
fn collapse_unchecked<T: Real>(l: &HurdleFactor<T>, t: &HurdleFactor<T>, r: &HurdleFactor<T>) -> CollapsedJob<T> {
    let one = T::one();
    let pi = one - (one - l.pi) * (one - t.pi) * (one - r.pi);
    CollapsedJob {
        pi: pi.max(T::zero()).min(one),
        mu: l.mu + t.mu + r.mu,
        sigma: (l.sigma * l.sigma + t.sigma * t.sigma + r.sigma * r.sigma).sqrt(),
    }
}

/// Sample the uncollapsed product `d_l · ε_t · β_r`.
pub fn sample_factor_product<R: Rng + ?Sized>(
    lang: &HurdleFactor<f64>,
    trans: &HurdleFactor<f64>,
    rev: &HurdleFactor<f64>,
    rng: &mut R,
) -> f64 {
    // every factor is drawn so the stream consumption is fixed
    lang.sample(rng) * trans.sample(rng) * rev.sample(rng)
}

/// Beta shape pairs for the `π` priors plus the shared `μ`/`σ` priors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HurdlePriors<T> {
    pub pi_language: (T, T),
    pub pi_translator: (T, T),
    pub pi_reviewer: (T, T),
    pub mu_sd: T,
    pub sigma_mean: T,
    pub sigma_variance: T,
}

impl<T: Real> HurdlePriors<T> {
    /// `π_l, π_t ~ Beta(2, 5)`, `π_r ~ Beta(1.5, 5)`: the reviewer prior has
    /// the lower mode, so perfect reviews are attributed to the job or the
    /// translator before the reviewer.
    pub fn reviewer_lower_mode() -> Self {
        Self {
            pi_language: (T::c(2.0), T::c(5.0)),
            pi_translator: (T::c(2.0), T::c(5.0)),
            pi_reviewer: (T::c(1.5), T::c(5.0)),
            mu_sd: T::one(),
            sigma_mean: T::c(0.5),
            sigma_variance: T::c(0.25),
        }
    }

    /// The swapped assignment: `π_l, π_t ~ Beta(1.5, 5)`, `π_r ~ Beta(2, 5)`.
    pub fn reviewer_higher_mode() -> Self {
        Self {
            pi_language: (T::c(1.5), T::c(5.0)),
            pi_translator: (T::c(1.5), T::c(5.0)),
            pi_reviewer: (T::c(2.0), T::c(5.0)),
            ..Self::reviewer_lower_mode()
        }
    }

    fn sigma_sd(&self) -> T {
        self.sigma_variance.sqrt()
    }

    /// Mean of each `π` prior, `a / (a + b)`.
    fn pi_mean(ab: (T, T)) -> T {
        ab.0 / (ab.0 + ab.1)
    }
}

impl<T: Real> Default for HurdlePriors<T> {
    fn default() -> Self {
        Self::reviewer_lower_mode()
    }
}

/// Constrained parameters for one language.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HurdleParams<T> {
    pub language: HurdleFactor<T>,
    pub translators: BTreeMap<String, HurdleFactor<T>>,
    pub reviewers: BTreeMap<String, HurdleFactor<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Language,
    Translator,
    Reviewer,
}

impl Role {
    pub fn suffix(self) -> &'static str {
        match self {
            Role::Language => "l",
            Role::Translator => "t",
            Role::Reviewer => "r",
        }
    }
}

/// The hurdle model bound to the jobs of one language pair.
#[derive(Debug, Clone)]
pub struct HurdleModel<T> {
    language: String,
    translator_ids: Vec<String>,
    reviewer_ids: Vec<String>,
    ept: Vec<T>,
    ln_ept: Vec<T>,
    translator_of_job: Vec<usize>,
    reviewer_of_job: Vec<usize>,
    pub priors: HurdlePriors<T>,
}

impl<T: Real> HurdleModel<T> {
    pub fn new(slice: &Dataset) -> Result<Self> {
        Self::with_priors(slice, HurdlePriors::default())
    }

    pub fn with_priors(slice: &Dataset, priors: HurdlePriors<T>) -> Result<Self> {
        let languages: Vec<&str> = slice.languages().collect();
        if languages.len() != 1 {
            return Err(Error::Structural(format!(
                "hurdle model is fitted per language; slice has {} languages",
                languages.len()
            )));
        }
        let translator_ids: Vec<String> = slice.translators().map(str::to_owned).collect();
        let reviewer_ids: Vec<String> = slice.reviewers().map(str::to_owned).collect();
        let recs = slice.records();
        Ok(Self {
            language: languages[0].to_owned(),
            translator_of_job: recs
                .iter()
                .map(|r| translator_ids.binary_search(&r.translator_id).expect("indexed"))
                .collect(),
            reviewer_of_job: recs
                .iter()
                .map(|r| reviewer_ids.binary_search(&r.reviewer_id).expect("indexed"))
                .collect(),
            ept: recs.iter().map(|r| T::c(r.ept)).collect(),
            ln_ept: recs
                .iter()
                .map(|r| if r.ept > 0.0 { T::c(r.ept.ln()) } else { T::zero() })
                .collect(),
            translator_ids,
            reviewer_ids,
            priors,
        })
    }

    pub fn language(&self) -> &str {
        &self.language
    }

    pub fn translator_ids(&self) -> &[String] {
        &self.translator_ids
    }

    pub fn reviewer_ids(&self) -> &[String] {
        &self.reviewer_ids
    }

    pub fn n_jobs(&self) -> usize {
        self.ept.len()
    }

    fn n_entities(&self) -> usize {
        1 + self.translator_ids.len() + self.reviewer_ids.len()
    }

    pub fn dim(&self) -> usize {
        3 * self.n_entities()
    }

    /// Entities in packing order.
    pub fn entities(&self) -> Vec<(Role, &str)> {
        std::iter::once((Role::Language, self.language.as_str()))
            .chain(self.translator_ids.iter().map(|t| (Role::Translator, t.as_str())))
            .chain(self.reviewer_ids.iter().map(|r| (Role::Reviewer, r.as_str())))
            .collect()
    }

    /// `pi_l, mu_l, sigma_l, pi_t[id], mu_t[id], sigma_t[id], ..., pi_r[id], ...`
    pub fn param_names(&self) -> Vec<String> {
        self.entities()
            .into_iter()
            .flat_map(|(role, id)| {
                let s = role.suffix();
                if role == Role::Language {
                    vec![format!("pi_{s}"), format!("mu_{s}"), format!("sigma_{s}")]
                } else {
                    vec![format!("pi_{s}[{id}]"), format!("mu_{s}[{id}]"), format!("sigma_{s}[{id}]")]
                }
            })
            .collect()
    }

    fn pi_prior(&self, role: Role) -> (T, T) {
        match role {
            Role::Language => self.priors.pi_language,
            Role::Translator => self.priors.pi_translator,
            Role::Reviewer => self.priors.pi_reviewer,
        }
    }

    fn check_keys(&self, p: &HurdleParams<T>) -> Result<()> {
        let same = |ids: &[String], map: &BTreeMap<String, HurdleFactor<T>>| {
            ids.len() == map.len() && ids.iter().zip(map.keys()).all(|(a, b)| a == b)
        };
        if !same(&self.translator_ids, &p.translators) {
            let missing: Vec<&String> = self.translator_ids.iter().filter(|t| !p.translators.contains_key(*t)).collect();
            return Err(Error::Structural(format!(
                "translator parameters do not match the slice (missing {missing:?})"
            )));
        }
        if !same(&self.reviewer_ids, &p.reviewers) {
            let missing: Vec<&String> = self.reviewer_ids.iter().filter(|r| !p.reviewers.contains_key(*r)).collect();
            return Err(Error::Structural(format!(
                "reviewer parameters do not match the slice (missing {missing:?})"
            )));
        }
        Ok(())
    }

    fn factor_list<'p>(&self, p: &'p HurdleParams<T>) -> Vec<(Role, &'p HurdleFactor<T>)> {
        std::iter::once((Role::Language, &p.language))
            .chain(p.translators.values().map(|f| (Role::Translator, f)))
            .chain(p.reviewers.values().map(|f| (Role::Reviewer, f)))
            .collect()
    }

    /// Collapsed parameters of every job, in slice order.
    pub fn collapsed_jobs(&self, p: &HurdleParams<T>) -> Result<Vec<CollapsedJob<T>>> {
        self.check_keys(p)?;
        let ts: Vec<&HurdleFactor<T>> = p.translators.values().collect();
        let rs: Vec<&HurdleFactor<T>> = p.reviewers.values().collect();
        Ok(self
            .translator_of_job
            .iter()
            .zip(&self.reviewer_of_job)
            .map(|(&t, &r)| collapse_unchecked(&p.language, ts[t], rs[r]))
            .collect())
    }

    pub fn log_likelihood(&self, p: &HurdleParams<T>) -> Result<T> {
        for (_, f) in self.factor_list(p) {
            f.validate()?;
        }
        let jobs = self.collapsed_jobs(p)?;
        Ok(self
            .ept
            .iter()
            .zip(&jobs)
            .fold(T::zero(), |acc, (&e, c)| acc + hurdle_ln_pdf(e, c.pi, c.mu, c.sigma)))
    }

    pub fn log_prior(&self, p: &HurdleParams<T>) -> Result<T> {
        self.check_keys(p)?;
        let pr = &self.priors;
        Ok(self.factor_list(p).into_iter().fold(T::zero(), |acc, (role, f)| {
            let (a, b) = self.pi_prior(role);
            acc + beta_ln_pdf(f.pi, a, b)
                + normal_ln_pdf(f.mu, T::zero(), pr.mu_sd)
                + truncated_normal_ln_pdf(f.sigma, pr.sigma_mean, pr.sigma_sd())
        }))
    }

    /// Joint log-posterior (up to the evidence) at constrained parameters.
    pub fn log_posterior(&self, p: &HurdleParams<T>) -> Result<T> {
        let ll = self.log_likelihood(p)?;
        if ll == T::neg_infinity() {
            return Ok(ll);
        }
        Ok(ll + self.log_prior(p)?)
    }

    /// `π → logit`, `μ` unchanged, `σ → ln`.
    pub fn unconstrain(&self, p: &HurdleParams<T>) -> Result<Vec<T>> {
        self.check_keys(p)?;
        let mut x = Vec::with_capacity(self.dim());
        for (_, f) in self.factor_list(p) {
            f.validate()?;
            if f.pi <= T::zero() || f.pi >= T::one() {
                return Err(domain(format!("pi = {} on the boundary has no unconstrained image", f.pi)));
            }
            x.extend([logit(f.pi), f.mu, f.sigma.ln()]);
        }
        Ok(x)
    }

    /// Inverse of [`Self::unconstrain`] plus `ln |J| = Σ [ln π + ln(1-π)] + Σ ln σ`.
    pub fn constrain(&self, x: &[T]) -> Result<(HurdleParams<T>, T)> {
        if x.len() != self.dim() {
            return Err(Error::Structural(format!("expected {} coordinates, got {}", self.dim(), x.len())));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(domain("unconstrained vector must be finite"));
        }
        let mut log_jac = T::zero();
        let mut factors = x.chunks_exact(3).map(|c| {
            log_jac = log_jac - softplus(-c[0]) - softplus(c[0]) + c[2];
            HurdleFactor {
                pi: sigmoid(c[0]),
                mu: c[1],
                sigma: c[2].exp(),
            }
        });
        let language = factors.next().expect("dim >= 3");
        let translators = self.translator_ids.iter().cloned().zip(factors.by_ref()).collect();
        let reviewers = self.reviewer_ids.iter().cloned().zip(factors.by_ref()).collect();
        Ok((
            HurdleParams {
                language,
                translators,
                reviewers,
            },
            log_jac,
        ))
    }

    /// `μ = 0`, `σ = 0.5`, `π` at its prior mean, for every entity.
    pub fn initial_params(&self) -> HurdleParams<T> {
        let pr = &self.priors;
        let factor = |ab| HurdleFactor {
            pi: HurdlePriors::pi_mean(ab),
            mu: T::zero(),
            sigma: pr.sigma_mean,
        };
        HurdleParams {
            language: factor(pr.pi_language),
            translators: self.translator_ids.iter().map(|t| (t.clone(), factor(pr.pi_translator))).collect(),
            reviewers: self.reviewer_ids.iter().map(|r| (r.clone(), factor(pr.pi_reviewer))).collect(),
        }
    }

    /// Unconstrained log-density and gradient, the sampler's hot path.
    pub fn log_density_grad(&self, x: &[T], grad: Option<&mut [T]>) -> T {
        let ne = self.n_entities();
        let nt = self.translator_ids.len();
        let pr = &self.priors;
        let half = T::c(0.5);

        // per-entity transforms
        let mut pi = Vec::with_capacity(ne);
        let mut ln1m = Vec::with_capacity(ne);
        let mut s2 = Vec::with_capacity(ne);
        for c in x.chunks_exact(3) {
            pi.push(sigmoid(c[0]));
            ln1m.push(-softplus(c[0]));
            s2.push((c[2] + c[2]).exp());
        }
        let mu = |e: usize| x[3 * e + 1];

        let mut g_local;
        let g: &mut [T] = match grad {
            Some(g) => {
                g.iter_mut().for_each(|v| *v = T::zero());
                g
            }
            None => {
                g_local = vec![T::zero(); x.len()];
                &mut g_local
            }
        };

        let mut lp = T::zero();
        let mut n_pos = 0usize;
        for j in 0..self.ept.len() {
            let ents = [0, 1 + self.translator_of_job[j], 1 + nt + self.reviewer_of_job[j]];
            let ln_q = ln1m[ents[0]] + ln1m[ents[1]] + ln1m[ents[2]];
            if self.ept[j] == T::zero() {
                lp = lp + log1mexp(ln_q);
                // d ln(1-Q) / d logit π_v = π_v Q / (1 - Q)
                let odds = T::one() / (-ln_q).exp_m1();
                for &e in &ents {
                    g[3 * e] = g[3 * e] + pi[e] * odds;
                }
            } else {
                n_pos += 1;
                let var = s2[ents[0]] + s2[ents[1]] + s2[ents[2]];
                let z = self.ln_ept[j] - mu(ents[0]) - mu(ents[1]) - mu(ents[2]);
                let z_over_v = z / var;
                lp = lp + ln_q - self.ln_ept[j] - half * var.ln() - half * z * z_over_v;
                let ds = (z * z_over_v - T::one()) / var;
                for &e in &ents {
                    g[3 * e] = g[3 * e] - pi[e];
                    g[3 * e + 1] = g[3 * e + 1] + z_over_v;
                    g[3 * e + 2] = g[3 * e + 2] + s2[e] * ds;
                }
            }
        }
        lp = lp - T::from_count(n_pos) * half_ln_two_pi::<T>();

        // priors plus log-Jacobian
        let sigma_sd = pr.sigma_sd();
        let mu_var = pr.mu_sd * pr.mu_sd;
        for e in 0..ne {
            let role = if e == 0 {
                Role::Language
            } else if e <= nt {
                Role::Translator
            } else {
                Role::Reviewer
            };
            let (a, b) = self.pi_prior(role);
            let xa = x[3 * e];
            // a ln π + b ln(1-π) - ln B(a, b)
            lp = lp - a * softplus(-xa) + b * ln1m[e] - ln_beta(a, b);
            g[3 * e] = g[3 * e] + a * (T::one() - pi[e]) - b * pi[e];

            let m = mu(e);
            lp = lp + normal_ln_pdf(m, T::zero(), pr.mu_sd);
            g[3 * e + 1] = g[3 * e + 1] - m / mu_var;

            let sigma = s2[e].sqrt();
            lp = lp + truncated_normal_ln_pdf(sigma, pr.sigma_mean, sigma_sd) + x[3 * e + 2];
            g[3 * e + 2] = g[3 * e + 2] - (sigma - pr.sigma_mean) / pr.sigma_variance * sigma + T::one();
        }
        lp
    }

    /// Convert unconstrained sampler output into named constrained draws.
    pub fn constrained_draws(&self, raw: &ChainSet) -> Result<ChainSet> {
        if raw.dim() != self.dim() {
            return Err(Error::Structural("draws do not match the model dimension".into()));
        }
        raw.map_draws(self.param_names(), |x| {
            x.chunks_exact(3)
                .flat_map(|c| [sigmoid(c[0]), c[1], c[2].exp()])
                .collect()
        })
    }

    fn check_draws(&self, draws: &ChainSet) -> Result<()> {
        if draws.names() != self.param_names().as_slice() {
            return Err(Error::Structural("draws are not constrained hurdle-model draws for this slice".into()));
        }
        Ok(())
    }

    fn factors_from_draw(draw: &[f64]) -> Vec<HurdleFactor<f64>> {
        draw.chunks_exact(3)
            .map(|c| HurdleFactor {
                pi: c[0],
                mu: c[1],
                sigma: c[2],
            })
            .collect()
    }

    fn job_entities(&self, j: usize) -> (usize, usize) {
        (1 + self.translator_of_job[j], 1 + self.translator_ids.len() + self.reviewer_of_job[j])
    }

    /// One replicated dataset from a constrained draw (packing order).
    pub fn replicate<R: Rng + ?Sized>(&self, draw: &[f64], rng: &mut R) -> Vec<f64> {
        let f = Self::factors_from_draw(draw);
        (0..self.n_jobs())
            .map(|j| {
                let (t, r) = self.job_entities(j);
                let c = collapse_unchecked(&f[0], &f[t], &f[r]);
                let u: f64 = rng.random();
                if u < c.pi {
                    0.0
                } else {
                    let z: f64 = rng.sample(StandardNormal);
                    (c.mu + c.sigma * z).exp()
                }
            })
            .collect()
    }

    /// `n_reps` replicated datasets from evenly spaced constrained draws.
    pub fn posterior_predictive(&self, draws: &ChainSet, n_reps: usize, streams: RngStreams) -> Result<Vec<Vec<f64>>> {
        self.check_draws(draws)?;
        let total = draws.total_draws();
        Ok((0..n_reps)
            .into_par_iter()
            .map(|k| {
                let draw = draws.flat_draw(draw_index(k, n_reps, total));
                self.replicate(draw, &mut streams.stream(&[k as u64]))
            })
            .collect())
    }

    /// Posterior mean of `π_j`, averaged over jobs.
    pub fn mean_collapsed_pi(&self, draws: &ChainSet) -> Result<f64> {
        self.check_draws(draws)?;
        let mut total = 0.0;
        for draw in draws.iter_draws() {
            let f = Self::factors_from_draw(draw);
            total += (0..self.n_jobs())
                .map(|j| {
                    let (t, r) = self.job_entities(j);
                    collapse_unchecked(&f[0], &f[t], &f[r]).pi
                })
                .sum::<f64>()
                / self.n_jobs() as f64;
        }
        Ok(total / draws.total_draws() as f64)
    }
}

impl<T: Real> LogDensity for HurdleModel<T> {
    fn dim(&self) -> usize {
        HurdleModel::dim(self)
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        let xt: Vec<T> = x.iter().map(|&v| T::c(v)).collect();
        self.log_density_grad(&xt, None).f64()
    }

    fn log_density_and_grad(&self, x: &[f64], grad: &mut [f64]) -> Option<f64> {
        let xt: Vec<T> = x.iter().map(|&v| T::c(v)).collect();
        let mut g = vec![T::zero(); x.len()];
        let lp = self.log_density_grad(&xt, Some(&mut g));
        for (o, v) in grad.iter_mut().zip(g) {
            *o = v.f64();
        }
        Some(lp.f64())
    }

    fn has_gradient(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_model::ReviewRecord;
    use crate::distributions::Family;

    fn f(pi: f64, mu: f64, sigma: f64) -> HurdleFactor<f64> {
        HurdleFactor::new(pi, mu, sigma).unwrap()
    }

    fn slice() -> Dataset {
        let epts = [0.0, 1.2, 0.4, 0.0, 3.5, 0.9, 2.2, 0.0];
        let recs = epts
            .iter()
            .enumerate()
            .map(|(i, &e)| {
                ReviewRecord::from_ept(format!("j{i}"), "en-it", format!("t{}", i % 3), format!("r{}", i % 2), 800, e)
                    .unwrap()
            })
            .collect();
        Dataset::new(recs).unwrap()
    }

    #[test]
    fn collapse_examples() {
        let c = collapse(&f(0.0, 0.5, 0.3), &f(0.0, -0.2, 0.4), &f(0.0, 0.1, f64::EPSILON)).unwrap();
        assert_eq!(c.pi, 0.0);
        assert!((c.mu - 0.4).abs() < 1e-9);
        assert!((c.sigma - 0.5).abs() < 1e-9);
        let c = collapse(&f(0.1, 0.0, 1.0), &f(0.2, 0.0, 1.0), &f(0.3, 0.0, 1.0)).unwrap();
        assert!((c.pi - 0.496).abs() < 1e-12);
        let c = collapse(&f(0.1, 0.0, 1.0), &f(1.0, 0.0, 1.0), &f(0.3, 0.0, 1.0)).unwrap();
        assert_eq!(c.pi, 1.0);
        assert!(collapse(&f(0.1, 0.0, 1.0), &HurdleFactor { pi: 1.2, mu: 0.0, sigma: 1.0 }, &f(0.3, 0.0, 1.0)).is_err());
    }

    #[test]
    fn transform_examples() {
        let m = HurdleModel::<f64>::new(&slice()).unwrap();
        let mut p = m.initial_params();
        p.language = f(0.5, 0.0, 1.0);
        let x = m.unconstrain(&p).unwrap();
        assert_eq!(&x[..3], &[0.0, 0.0, 0.0]);
        let one = HurdleModel::<f64>::new(&Dataset::new(vec![ReviewRecord::from_ept("j", "l", "t", "r", 500, 1.0).unwrap()]).unwrap()).unwrap();
        let half = HurdleParams {
            language: f(0.5, 0.0, 1.0),
            translators: [("t".to_string(), f(0.5, 0.0, 1.0))].into(),
            reviewers: [("r".to_string(), f(0.5, 0.0, 1.0))].into(),
        };
        let (_, jac) = one.constrain(&one.unconstrain(&half).unwrap()).unwrap();
        assert!((jac - 3.0 * 0.25_f64.ln()).abs() < 1e-12);
        assert!((logit(0.496_f64) + 0.016_000).abs() < 1e-6);
        p.language.pi = 1.0;
        assert!(matches!(m.unconstrain(&p), Err(Error::Domain(_))));
    }

    #[test]
    fn zero_job_likelihood_is_log_collapsed_pi() {
        let ds = Dataset::new(vec![ReviewRecord::from_ept("j", "l", "t", "r", 500, 0.0).unwrap()]).unwrap();
        let m = HurdleModel::<f64>::new(&ds).unwrap();
        let p = HurdleParams {
            language: f(0.2, 0.1, 0.4),
            translators: [("t".to_string(), f(0.3, -0.2, 0.6))].into(),
            reviewers: [("r".to_string(), f(0.1, 0.3, 0.5))].into(),
        };
        let pi_j: f64 = 1.0 - 0.8 * 0.7 * 0.9;
        assert!((m.log_likelihood(&p).unwrap() - pi_j.ln()).abs() < 1e-12);
        let prior = [(0.2, 0.1, 0.4, 2.0), (0.3, -0.2, 0.6, 2.0), (0.1, 0.3, 0.5, 1.5)]
            .iter()
            .map(|&(pi, mu, s, a)| {
                Family::Beta { a, b: 5.0 }.ln_pdf(pi).unwrap()
                    + Family::Normal { mean: 0.0, sd: 1.0 }.ln_pdf(mu).unwrap()
                    + Family::truncated_normal_var(0.5, 0.25).ln_pdf(s).unwrap()
            })
            .sum::<f64>();
        assert!((m.log_posterior(&p).unwrap() - pi_j.ln() - prior).abs() < 1e-12);
    }

    #[test]
    fn certain_atom_contradicts_positive_job() {
        let m = HurdleModel::<f64>::new(&slice()).unwrap();
        let mut p = m.initial_params();
        p.translators.get_mut("t1").unwrap().pi = 1.0;
        assert_eq!(m.log_posterior(&p).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn location_shift_leaves_likelihood() {
        let m = HurdleModel::<f64>::new(&slice()).unwrap();
        let p = m.initial_params();
        let mut q = p.clone();
        q.language.mu += 0.7;
        q.translators.values_mut().for_each(|t| t.mu -= 0.7);
        assert!((m.log_likelihood(&p).unwrap() - m.log_likelihood(&q).unwrap()).abs() < 1e-10);
        assert!((m.log_prior(&p).unwrap() - m.log_prior(&q).unwrap()).abs() > 1e-3);
    }

    #[test]
    fn missing_entity_is_structural() {
        let m = HurdleModel::<f64>::new(&slice()).unwrap();
        let mut p = m.initial_params();
        p.reviewers.remove("r1");
        assert!(matches!(m.log_posterior(&p), Err(Error::Structural(_))));
    }

    #[test]
    fn multi_language_slice_rejected() {
        let recs = vec![
            ReviewRecord::from_ept("a", "l1", "t", "r", 500, 1.0).unwrap(),
            ReviewRecord::from_ept("b", "l2", "t", "r", 500, 1.0).unwrap(),
        ];
        assert!(HurdleModel::<f64>::new(&Dataset::new(recs).unwrap()).is_err());
    }

    #[test]
    fn fast_path_matches_direct() {
        let m = HurdleModel::<f64>::new(&slice()).unwrap();
        let mut p = m.initial_params();
        p.language = f(0.15, 0.3, 0.7);
        p.translators.insert("t0".into(), f(0.4, -0.5, 0.2));
        p.reviewers.insert("r1".into(), f(0.05, 0.9, 1.1));
        let x = m.unconstrain(&p).unwrap();
        let (back, jac) = m.constrain(&x).unwrap();
        let direct = m.log_posterior(&back).unwrap() + jac;
        assert!((m.log_density_grad(&x, None) - direct).abs() < 1e-10);
    }

    #[test]
    fn atom_replicates_all_zero() {
        let m = HurdleModel::<f64>::new(&slice()).unwrap();
        let mut p = m.initial_params();
        p.language.pi = 1.0;
        let draw: Vec<f64> = std::iter::once(&p.language)
            .chain(p.translators.values())
            .chain(p.reviewers.values())
            .flat_map(|f| [f.pi, f.mu, f.sigma])
            .collect();
        let rep = m.replicate(&draw, &mut RngStreams::new(1).stream(&[0]));
        assert!(rep.iter().all(|&v| v == 0.0));
    }
}
