//! Gaussian reviewer-bias model.
//!
//! ```text
//! q_j     ~ Gamma(shape 1, scale 3)
//! beta_r  ~ N(0, 10²)
//! sigma_r ~ HalfNormal(1)
//! e_j     ~ N(q_j + beta_r(j), sigma_r(j)²)
//! ```
//!
//! Unconstrained packing: `[ln q_1..ln q_J, beta_1..beta_R, ln sigma_1..ln sigma_R]`,
//! reviewers in sorted id order. With a single review per job, `q_j` is
//! identified only through its prior; the likelihood sees `q_j + beta_r`.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data_model::Dataset;
use crate::distributions::{gamma_ln_pdf, normal_ln_pdf, truncated_normal_ln_pdf};
use crate::error::{domain, Error, Result};
use crate::inference::{ChainSet, LogDensity};
use crate::rng::RngStreams;
use crate::scalar::{half_ln_two_pi, Real};

/// Smallest latent quality used when initializing from observed zeros.
pub const Q_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianPriors<T> {
    pub q_shape: T,
    pub q_scale: T,
    pub beta_sd: T,
    pub sigma_sd: T,
}

impl<T: Real> Default for GaussianPriors<T> {
    fn default() -> Self {
        Self {
            q_shape: T::one(),
            q_scale: T::c(3.0),
            beta_sd: T::c(10.0),
            sigma_sd: T::one(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianParams<T> {
    /// Latent quality per job, in dataset order.
    pub q: Vec<T>,
    /// Reviewer offset, sorted reviewer order.
    pub beta: Vec<T>,
    /// Reviewer noise scale, sorted reviewer order.
    pub sigma: Vec<T>,
}

/// The Gaussian model bound to one dataset (normally one language pair).
#[derive(Debug, Clone)]
pub struct GaussianModel<T> {
    job_ids: Vec<String>,
    reviewer_ids: Vec<String>,
    ept: Vec<T>,
    reviewer_of_job: Vec<usize>,
    pub priors: GaussianPriors<T>,
}

impl<T: Real> GaussianModel<T> {
    pub fn new(dataset: &Dataset) -> Result<Self> {
        Self::with_priors(dataset, GaussianPriors::default())
    }

    pub fn with_priors(dataset: &Dataset, priors: GaussianPriors<T>) -> Result<Self> {
        if dataset.is_empty() {
            return Err(Error::Structural("Gaussian model needs at least one job".into()));
        }
        let reviewer_ids: Vec<String> = dataset.reviewers().map(str::to_owned).collect();
        let reviewer_of_job = dataset
            .records()
            .iter()
            .map(|r| reviewer_ids.binary_search(&r.reviewer_id).expect("indexed reviewer"))
            .collect();
        Ok(Self {
            job_ids: dataset.records().iter().map(|r| r.job_id.clone()).collect(),
            reviewer_ids,
            ept: dataset.records().iter().map(|r| T::c(r.ept)).collect(),
            reviewer_of_job,
            priors,
        })
    }

    pub fn n_jobs(&self) -> usize {
        self.job_ids.len()
    }

    pub fn n_reviewers(&self) -> usize {
        self.reviewer_ids.len()
    }

    pub fn reviewer_ids(&self) -> &[String] {
        &self.reviewer_ids
    }

    pub fn job_ids(&self) -> &[String] {
        &self.job_ids
    }

    pub fn dim(&self) -> usize {
        self.n_jobs() + 2 * self.n_reviewers()
    }

    /// Constrained parameter names in packing order.
    pub fn param_names(&self) -> Vec<String> {
        let q = self.job_ids.iter().map(|j| format!("q[{j}]"));
        let b = self.reviewer_ids.iter().map(|r| format!("beta[{r}]"));
        let s = self.reviewer_ids.iter().map(|r| format!("sigma[{r}]"));
        q.chain(b).chain(s).collect()
    }

    fn check_dims(&self, p: &GaussianParams<T>) -> Result<()> {
        if p.q.len() != self.n_jobs() || p.beta.len() != self.n_reviewers() || p.sigma.len() != self.n_reviewers() {
            return Err(Error::Structural(format!(
                "expected {} q, {} beta, {} sigma; got {}, {}, {}",
                self.n_jobs(),
                self.n_reviewers(),
                self.n_reviewers(),
                p.q.len(),
                p.beta.len(),
                p.sigma.len()
            )));
        }
        Ok(())
    }

    /// `Σ_j ln N(e_j; q_j + β_r, σ_r²)`.
    pub fn log_likelihood(&self, p: &GaussianParams<T>) -> Result<T> {
        self.check_dims(p)?;
        Ok(self
            .ept
            .iter()
            .zip(&p.q)
            .zip(&self.reviewer_of_job)
            .fold(T::zero(), |acc, ((&e, &q), &r)| acc + normal_ln_pdf(e, q + p.beta[r], p.sigma[r])))
    }

    pub fn log_prior(&self, p: &GaussianParams<T>) -> Result<T> {
        self.check_dims(p)?;
        let pr = &self.priors;
        let q = p.q.iter().fold(T::zero(), |a, &q| a + gamma_ln_pdf(q, pr.q_shape, pr.q_scale));
        let b = p.beta.iter().fold(T::zero(), |a, &b| a + normal_ln_pdf(b, T::zero(), pr.beta_sd));
        let s = p
            .sigma
            .iter()
            .fold(T::zero(), |a, &s| a + truncated_normal_ln_pdf(s, T::zero(), pr.sigma_sd));
        Ok(q + b + s)
    }

    /// Joint log-posterior (up to the evidence) at constrained parameters.
    pub fn log_posterior(&self, p: &GaussianParams<T>) -> Result<T> {
        Ok(self.log_likelihood(p)? + self.log_prior(p)?)
    }

    /// `q, σ → ln`, `β` unchanged.
    pub fn unconstrain(&self, p: &GaussianParams<T>) -> Result<Vec<T>> {
        self.check_dims(p)?;
        let all = p.q.iter().chain(&p.beta).chain(&p.sigma);
        if all.clone().any(|v| !v.is_finite()) {
            return Err(domain("Gaussian parameters must be finite"));
        }
        if p.q.iter().chain(&p.sigma).any(|&v| v <= T::zero()) {
            return Err(domain("q and sigma must be strictly positive to unconstrain"));
        }
        Ok(p.q
            .iter()
            .map(|q| q.ln())
            .chain(p.beta.iter().copied())
            .chain(p.sigma.iter().map(|s| s.ln()))
            .collect())
    }

    /// Inverse of [`Self::unconstrain`] plus `ln |J| = Σ ln q + Σ ln σ`.
    pub fn constrain(&self, x: &[T]) -> Result<(GaussianParams<T>, T)> {
        if x.len() != self.dim() {
            return Err(Error::Structural(format!("expected {} coordinates, got {}", self.dim(), x.len())));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(domain("unconstrained vector must be finite"));
        }
        let (nj, nr) = (self.n_jobs(), self.n_reviewers());
        let log_jac = x[..nj].iter().chain(&x[nj + nr..]).fold(T::zero(), |a, &v| a + v);
        Ok((
            GaussianParams {
                q: x[..nj].iter().map(|v| v.exp()).collect(),
                beta: x[nj..nj + nr].to_vec(),
                sigma: x[nj + nr..].iter().map(|v| v.exp()).collect(),
            },
            log_jac,
        ))
    }

    /// Initial point: `q_j = max(e_j, 1e-6)`, `β = 0`, `σ = 1`.
    pub fn initial_params(&self) -> GaussianParams<T> {
        GaussianParams {
            q: self.ept.iter().map(|&e| e.max(T::c(Q_FLOOR))).collect(),
            beta: vec![T::zero(); self.n_reviewers()],
            sigma: vec![T::one(); self.n_reviewers()],
        }
    }

    /// Unconstrained log-density and gradient, the sampler's hot path.
    pub fn log_density_grad(&self, x: &[T], grad: Option<&mut [T]>) -> T {
        let (nj, nr) = (self.n_jobs(), self.n_reviewers());
        let pr = &self.priors;
        let (u, rest) = x.split_at(nj);
        let (beta, w) = rest.split_at(nr);
        let sigma2: Vec<T> = w.iter().map(|&w| (w + w).exp()).collect();
        let half = T::c(0.5);
        let mut lp = T::zero();

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
        for j in 0..nj {
            let r = self.reviewer_of_job[j];
            let q = u[j].exp();
            let resid = self.ept[j] - q - beta[r];
            let inv_var = T::one() / sigma2[r];
            lp = lp - w[r] - half * resid * resid * inv_var;
            let d = resid * inv_var;
            g[j] = g[j] + q * d;
            g[nj + r] = g[nj + r] + d;
            g[nj + nr + r] = g[nj + nr + r] - T::one() + resid * d;
            // gamma prior on q plus Jacobian (u_j)
            lp = lp + pr.q_shape * u[j] - q / pr.q_scale;
            g[j] = g[j] + pr.q_shape - q / pr.q_scale;
        }
        lp = lp - T::from_count(nj) * half_ln_two_pi::<T>();
        let q_norm = crate::scalar::ln_gamma(pr.q_shape) + pr.q_shape * pr.q_scale.ln();
        lp = lp - T::from_count(nj) * q_norm;

        let beta_var = pr.beta_sd * pr.beta_sd;
        let sigma_var = pr.sigma_sd * pr.sigma_sd;
        for r in 0..nr {
            lp = lp + normal_ln_pdf(beta[r], T::zero(), pr.beta_sd);
            g[nj + r] = g[nj + r] - beta[r] / beta_var;
            // half-normal prior on sigma plus Jacobian (w_r)
            lp = lp + truncated_normal_ln_pdf(sigma2[r].sqrt(), T::zero(), pr.sigma_sd) + w[r];
            g[nj + nr + r] = g[nj + nr + r] - sigma2[r] / sigma_var + T::one();
        }
        lp
    }

    /// Convert unconstrained sampler output into named constrained draws.
    pub fn constrained_draws(&self, raw: &ChainSet) -> Result<ChainSet> {
        if raw.dim() != self.dim() {
            return Err(Error::Structural("draws do not match the model dimension".into()));
        }
        let (nj, nr) = (self.n_jobs(), self.n_reviewers());
        raw.map_draws(self.param_names(), |x| {
            x.iter()
                .enumerate()
                .map(|(i, &v)| if i < nj || i >= nj + nr { v.exp() } else { v })
                .collect()
        })
    }

    fn params_from_draw(&self, draw: &[f64]) -> GaussianParams<f64> {
        let (nj, nr) = (self.n_jobs(), self.n_reviewers());
        GaussianParams {
            q: draw[..nj].to_vec(),
            beta: draw[nj..nj + nr].to_vec(),
            sigma: draw[nj + nr..].to_vec(),
        }
    }

    /// One replicated dataset: `e_j ~ N(q_j + β_r, σ_r²)`. Negative values are kept.
    pub fn replicate<R: Rng + ?Sized>(&self, p: &GaussianParams<f64>, rng: &mut R) -> Vec<f64> {
        self.reviewer_of_job
            .iter()
            .zip(&p.q)
            .map(|(&r, &q)| {
                let z: f64 = rng.sample(StandardNormal);
                q + p.beta[r] + p.sigma[r] * z
            })
            .collect()
    }

    /// `n_reps` replicated datasets from evenly spaced constrained draws.
    /// Replication `k` uses stream `[k]` of `streams`.
    pub fn posterior_predictive(&self, draws: &ChainSet, n_reps: usize, streams: RngStreams) -> Result<Vec<Vec<f64>>> {
        if draws.names() != self.param_names().as_slice() {
            return Err(Error::Structural("draws are not constrained Gaussian-model draws for this dataset".into()));
        }
        let total = draws.total_draws();
        Ok((0..n_reps)
            .into_par_iter()
            .map(|k| {
                let p = self.params_from_draw(draws.flat_draw(draw_index(k, n_reps, total)));
                self.replicate(&p, &mut streams.stream(&[k as u64]))
            })
            .collect())
    }
}

/// Sampler path used for `q` completion draws; chains themselves use `[chain]`.
const COMPLETION_PATH: u64 = u64::MAX;

impl<T: Real> GaussianModel<T> {
    /// With `q_shape = 1` the prior on `q_j` is exponential and `q_j` integrates
    /// out in closed form (exponentially modified Gaussian marginal).
    pub fn supports_marginal(&self) -> bool {
        (self.priors.q_shape.f64() - 1.0).abs() < 1e-12
    }

    pub fn marginal(&self) -> Result<GaussianMarginal<'_, T>> {
        if !self.supports_marginal() {
            return Err(Error::Structural("q can be integrated out only when q_shape = 1".into()));
        }
        let mut counts: std::collections::BTreeMap<(usize, u64), usize> = Default::default();
        for (&r, &e) in self.reviewer_of_job.iter().zip(&self.ept) {
            *counts.entry((r, e.f64().to_bits())).or_default() += 1;
        }
        let groups = counts
            .into_iter()
            .map(|((r, bits), n)| (r, T::c(f64::from_bits(bits)), T::from_count(n)))
            .collect();
        Ok(GaussianMarginal { model: self, groups })
    }
}

impl GaussianModel<f64> {
    /// Posterior draws, constrained and named as [`Self::param_names`].
    ///
    /// For `q_shape = 1` the sampler runs on `(β, ln σ)` with `q` integrated
    /// out; each draw is then completed with an exact draw of `q` from its
    /// truncated-normal conditional. Otherwise the joint density is sampled.
    pub fn sample_posterior(&self, config: &crate::inference::SamplerConfig) -> Result<ChainSet> {
        if !self.supports_marginal() {
            let init = self.unconstrain(&self.initial_params())?;
            let raw = crate::inference::run_mcmc(self, &init, config)?;
            let mut d = self.constrained_draws(&raw)?;
            d.stats = raw.stats;
            return Ok(d);
        }
        let marginal = self.marginal()?;
        let raw = crate::inference::run_mcmc(&marginal, &marginal.initial_point(), config)?;
        marginal.complete_draws(&raw, RngStreams::new(config.seed).split(COMPLETION_PATH))
    }
}

/// Gaussian posterior over `[β_1..β_R, ln σ_1..ln σ_R]` with `q` integrated out.
///
/// `e_j = q_j + β_r + ε_j` with `q_j ~ Exp(λ = 1/scale)` gives
/// `ln p(e_j) = ln λ + λ(β_r - e_j) + λ²σ_r²/2 + ln Φ(z_j)`,
/// `z_j = (e_j - β_r)/σ_r - λσ_r`.
#[derive(Debug, Clone)]
pub struct GaussianMarginal<'a, T> {
    model: &'a GaussianModel<T>,
    /// Distinct `(reviewer, e)` pairs with multiplicities; zeros repeat a lot.
    groups: Vec<(usize, T, T)>,
}

impl<T: Real> GaussianMarginal<'_, T> {
    pub fn dim(&self) -> usize {
        2 * self.model.n_reviewers()
    }

    /// `β = 0`, `σ = 1`.
    pub fn initial_point(&self) -> Vec<f64> {
        vec![0.0; self.dim()]
    }

    pub fn log_density_grad(&self, x: &[T], grad: Option<&mut [T]>) -> T {
        let m = self.model;
        let nr = m.n_reviewers();
        let pr = &m.priors;
        let (beta, w) = x.split_at(nr);
        let sigma: Vec<T> = w.iter().map(|&w| w.exp()).collect();
        let lambda = T::one() / pr.q_scale;
        let half = T::c(0.5);
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
        let mut lp = T::from_count(m.n_jobs()) * lambda.ln();
        for &(r, e, n) in &self.groups {
            let s = sigma[r];
            let d = e - beta[r];
            let z = d / s - lambda * s;
            lp = lp + n * (-lambda * d + half * lambda * lambda * s * s + crate::scalar::ln_std_normal_cdf(z));
            let mills = crate::scalar::inverse_mills(z);
            g[r] = g[r] + n * (lambda - mills / s);
            g[nr + r] = g[nr + r] + n * (lambda * lambda * s * s - mills * (d / s + lambda * s));
        }
        let beta_var = pr.beta_sd * pr.beta_sd;
        let sigma_var = pr.sigma_sd * pr.sigma_sd;
        for r in 0..nr {
            lp = lp + normal_ln_pdf(beta[r], T::zero(), pr.beta_sd);
            g[r] = g[r] - beta[r] / beta_var;
            lp = lp + truncated_normal_ln_pdf(sigma[r], T::zero(), pr.sigma_sd) + w[r];
            g[nr + r] = g[nr + r] - sigma[r] * sigma[r] / sigma_var + T::one();
        }
        lp
    }
}

impl GaussianMarginal<'_, f64> {
    /// Full constrained draws from `(β, ln σ)` draws: `q_j` given `e_j, β_r, σ_r`
    /// is `N(e_j - β_r - λσ_r², σ_r²)` truncated to `q > 0`. Draw `(c, i)`
    /// uses stream `[c, i]` of `streams`.
    pub fn complete_draws(&self, raw: &ChainSet, streams: RngStreams) -> Result<ChainSet> {
        let m = self.model;
        if raw.dim() != self.dim() {
            return Err(Error::Structural("draws do not match the marginal dimension".into()));
        }
        let (nj, nr) = (m.n_jobs(), m.n_reviewers());
        let lambda = 1.0 / m.priors.q_scale;
        let chains: Vec<Vec<f64>> = (0..raw.n_chains())
            .into_par_iter()
            .map(|c| {
                let mut out = Vec::with_capacity(raw.n_draws() * m.dim());
                for i in 0..raw.n_draws() {
                    let x = raw.draw(c, i);
                    let (beta, w) = x.split_at(nr);
                    let sigma: Vec<f64> = w.iter().map(|v| v.exp()).collect();
                    let mut rng = streams.stream(&[c as u64, i as u64]);
                    for j in 0..nj {
                        let r = m.reviewer_of_job[j];
                        let s = sigma[r];
                        let mean = m.ept[j] - beta[r] - lambda * s * s;
                        out.push(crate::distributions::sample_truncated_normal(&mut rng, mean, s).max(f64::MIN_POSITIVE));
                    }
                    out.extend_from_slice(beta);
                    out.extend_from_slice(&sigma);
                }
                out
            })
            .collect();
        ChainSet::from_chains(m.param_names(), chains, raw.stats.clone(), raw.metadata.clone())
    }
}

impl<T: Real> LogDensity for GaussianMarginal<'_, T> {
    fn dim(&self) -> usize {
        GaussianMarginal::dim(self)
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

/// Draw used by replication `k` of `n_reps` when `total` draws are available.
pub(crate) fn draw_index(k: usize, n_reps: usize, total: usize) -> usize {
    if n_reps <= total {
        k * total / n_reps
    } else {
        k % total
    }
}

impl<T: Real> LogDensity for GaussianModel<T> {
    fn dim(&self) -> usize {
        GaussianModel::dim(self)
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
