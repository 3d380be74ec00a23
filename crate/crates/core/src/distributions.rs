//! Log-density, CDF and sampling kernels for the families the two models use.
//!
//! Parameterizations:
//! * `Normal { mean, sd }`
//! * `TruncatedNormal { mean, sd }`: the normal restricted to `[0, ∞)`, with
//!   its normalizing constant. Use [`Family::truncated_normal_var`] for the
//!   `(mean, variance)` notation of the priors.
//! * `HalfNormal { sd }`: the `mean = 0` case of the above.
//! * `Gamma { shape, scale }`: mean `shape * scale`.
//! * `Beta { a, b }` on `[0, 1]`.
//! * `LogNormal { mu, sigma }`: `ln x ~ N(mu, sigma²)`.
//! * `Hurdle`: atom `pi` at zero, `(1 - pi) LogNormal(mu, sigma²)` on `x > 0`.

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::scalar::{half_ln_two_pi, ln_beta, ln_gamma, ln_std_normal_cdf, Real};

/// Hurdle-lognormal parameters `(π, μ, σ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HurdleLognormal<T> {
    pub pi: T,
    pub mu: T,
    pub sigma: T,
}

impl<T: Real> HurdleLognormal<T> {
    pub fn new(pi: T, mu: T, sigma: T) -> Result<Self> {
        let p = Self { pi, mu, sigma };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.pi >= T::zero() && self.pi <= T::one()) {
            return Err(domain(format!("hurdle pi must lie in [0, 1], got {}", self.pi)));
        }
        if !self.mu.is_finite() {
            return Err(domain(format!("hurdle mu must be finite, got {}", self.mu)));
        }
        if !(self.sigma > T::zero() && self.sigma.is_finite()) {
            return Err(domain(format!("hurdle sigma must be positive, got {}", self.sigma)));
        }
        Ok(())
    }

    /// `ln π` at zero, `ln(1-π) + ln LogNormal(x; μ, σ²)` above.
    pub fn ln_pdf(&self, x: T) -> Result<T> {
        self.validate()?;
        if !(x >= T::zero()) {
            return Err(domain(format!("hurdle density undefined for negative x = {x}")));
        }
        Ok(hurdle_ln_pdf(x, self.pi, self.mu, self.sigma))
    }

    /// Bernoulli(π) for the atom, lognormal otherwise. Zeros are exact.
    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> T {
        let u: f64 = rng.random();
        if u < self.pi.f64() {
            T::zero()
        } else {
            let z: f64 = rng.sample(StandardNormal);
            T::c((self.mu.f64() + self.sigma.f64() * z).exp())
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        let pi = self.pi.f64();
        pi + (1.0 - pi) * lognormal_cdf(x, self.mu.f64(), self.sigma.f64())
    }
}

/// Unchecked hurdle log-density; callers guarantee valid parameters and `x ≥ 0`.
#[inline]
pub fn hurdle_ln_pdf<T: Real>(x: T, pi: T, mu: T, sigma: T) -> T {
    if x == T::zero() {
        pi.ln()
    } else {
        (T::one() - pi).ln() + lognormal_ln_pdf(x, mu, sigma)
    }
}

#[inline]
pub fn normal_ln_pdf<T: Real>(x: T, mean: T, sd: T) -> T {
    let z = (x - mean) / sd;
    -half_ln_two_pi::<T>() - sd.ln() - T::c(0.5) * z * z
}

/// Log-normalizer `ln Φ(mean / sd)` of a normal truncated to `[0, ∞)`.
#[inline]
pub fn truncated_normal_ln_mass<T: Real>(mean: T, sd: T) -> T {
    ln_std_normal_cdf(mean / sd)
}

#[inline]
pub fn truncated_normal_ln_pdf<T: Real>(x: T, mean: T, sd: T) -> T {
    if x < T::zero() {
        return T::neg_infinity();
    }
    normal_ln_pdf(x, mean, sd) - truncated_normal_ln_mass(mean, sd)
}

#[inline]
pub fn gamma_ln_pdf<T: Real>(x: T, shape: T, scale: T) -> T {
    if x < T::zero() {
        return T::neg_infinity();
    }
    if x == T::zero() {
        return if shape == T::one() {
            -scale.ln()
        } else if shape < T::one() {
            T::infinity()
        } else {
            T::neg_infinity()
        };
    }
    (shape - T::one()) * x.ln() - x / scale - ln_gamma(shape) - shape * scale.ln()
}

#[inline]
pub fn beta_ln_pdf<T: Real>(x: T, a: T, b: T) -> T {
    if x < T::zero() || x > T::one() {
        return T::neg_infinity();
    }
    let left = if a == T::one() { T::zero() } else { (a - T::one()) * x.ln() };
    let right = if b == T::one() {
        T::zero()
    } else {
        (b - T::one()) * (-x).ln_1p()
    };
    left + right - ln_beta(a, b)
}

/// Lognormal log-density, evaluated in log space; `-∞` at `x = 0`.
#[inline]
pub fn lognormal_ln_pdf<T: Real>(x: T, mu: T, sigma: T) -> T {
    if x <= T::zero() {
        return T::neg_infinity();
    }
    let lx = x.ln();
    let z = (lx - mu) / sigma;
    -lx - half_ln_two_pi::<T>() - sigma.ln() - T::c(0.5) * z * z
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-z / std::f64::consts::SQRT_2)
}

fn lognormal_cdf(x: f64, mu: f64, sigma: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        std_normal_cdf((x.ln() - mu) / sigma)
    }
}

/// A tagged distribution from the catalogue.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family<T> {
    Normal { mean: T, sd: T },
    TruncatedNormal { mean: T, sd: T },
    HalfNormal { sd: T },
    Gamma { shape: T, scale: T },
    Beta { a: T, b: T },
    LogNormal { mu: T, sigma: T },
    Hurdle(HurdleLognormal<T>),
}

impl<T: Real> Family<T> {
    /// Zero-truncated normal from `(mean, variance)`.
    pub fn truncated_normal_var(mean: T, variance: T) -> Self {
        Family::TruncatedNormal {
            mean,
            sd: variance.sqrt(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Family::Normal { .. } => "normal",
            Family::TruncatedNormal { .. } => "truncated_normal",
            Family::HalfNormal { .. } => "half_normal",
            Family::Gamma { .. } => "gamma",
            Family::Beta { .. } => "beta",
            Family::LogNormal { .. } => "lognormal",
            Family::Hurdle(_) => "hurdle_lognormal",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: T, what: &str| {
            if v > T::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(domain(format!("{} {what} must be positive and finite, got {v}", self.name())))
            }
        };
        let finite = |v: T, what: &str| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(domain(format!("{} {what} must be finite, got {v}", self.name())))
            }
        };
        match *self {
            Family::Normal { mean, sd } | Family::TruncatedNormal { mean, sd } => {
                finite(mean, "mean")?;
                positive(sd, "sd")
            }
            Family::HalfNormal { sd } => positive(sd, "sd"),
            Family::Gamma { shape, scale } => {
                positive(shape, "shape")?;
                positive(scale, "scale")
            }
            Family::Beta { a, b } => {
                positive(a, "a")?;
                positive(b, "b")
            }
            Family::LogNormal { mu, sigma } => {
                finite(mu, "mu")?;
                positive(sigma, "sigma")
            }
            Family::Hurdle(h) => h.validate(),
        }
    }

    /// Natural-log density at `x`; `-∞` outside the support.
    pub fn ln_pdf(&self, x: T) -> Result<T> {
        self.validate()?;
        if x.is_nan() {
            return Err(domain("density evaluated at NaN"));
        }
        Ok(match *self {
            Family::Normal { mean, sd } => normal_ln_pdf(x, mean, sd),
            Family::TruncatedNormal { mean, sd } => truncated_normal_ln_pdf(x, mean, sd),
            Family::HalfNormal { sd } => truncated_normal_ln_pdf(x, T::zero(), sd),
            Family::Gamma { shape, scale } => gamma_ln_pdf(x, shape, scale),
            Family::Beta { a, b } => beta_ln_pdf(x, a, b),
            Family::LogNormal { mu, sigma } => lognormal_ln_pdf(x, mu, sigma),
            Family::Hurdle(h) => {
                if x < T::zero() {
                    T::neg_infinity()
                } else {
                    hurdle_ln_pdf(x, h.pi, h.mu, h.sigma)
                }
            }
        })
    }

    /// Cumulative distribution function, in `f64`.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        use statrs::function::{beta::beta_reg, gamma::gamma_lr};
        self.validate()?;
        Ok(match *self {
            Family::Normal { mean, sd } => std_normal_cdf((x - mean.f64()) / sd.f64()),
            Family::TruncatedNormal { mean, sd } => truncated_cdf(x, mean.f64(), sd.f64()),
            Family::HalfNormal { sd } => truncated_cdf(x, 0.0, sd.f64()),
            Family::Gamma { shape, scale } => {
                if x <= 0.0 {
                    0.0
                } else {
                    gamma_lr(shape.f64(), x / scale.f64())
                }
            }
            Family::Beta { a, b } => {
                if x <= 0.0 {
                    0.0
                } else if x >= 1.0 {
                    1.0
                } else {
                    beta_reg(a.f64(), b.f64(), x)
                }
            }
            Family::LogNormal { mu, sigma } => lognormal_cdf(x, mu.f64(), sigma.f64()),
            Family::Hurdle(h) => h.cdf(x),
        })
    }

    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> T {
        match *self {
            Family::Normal { mean, sd } => {
                let z: f64 = rng.sample(StandardNormal);
                T::c(mean.f64() + sd.f64() * z)
            }
            Family::TruncatedNormal { mean, sd } => T::c(sample_truncated_normal(rng, mean.f64(), sd.f64())),
            Family::HalfNormal { sd } => {
                let z: f64 = rng.sample(StandardNormal);
                T::c(sd.f64() * z.abs())
            }
            Family::Gamma { shape, scale } => {
                let g = rand_distr::Gamma::new(shape.f64(), scale.f64()).expect("validated");
                T::c(g.sample(rng))
            }
            Family::Beta { a, b } => {
                let d = rand_distr::Beta::new(a.f64(), b.f64()).expect("validated");
                T::c(d.sample(rng))
            }
            Family::LogNormal { mu, sigma } => {
                let z: f64 = rng.sample(StandardNormal);
                T::c((mu.f64() + sigma.f64() * z).exp())
            }
            Family::Hurdle(h) => h.sample_one(rng),
        }
    }

    /// `n` draws, deterministic given the generator state.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Result<Vec<T>> {
        self.validate()?;
        Ok((0..n).map(|_| self.sample_one(rng)).collect())
    }
}

fn truncated_cdf(x: f64, mean: f64, sd: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let lo = std_normal_cdf(-mean / sd);
    let mass = 1.0 - lo;
    ((std_normal_cdf((x - mean) / sd) - lo) / mass).clamp(0.0, 1.0)
}

/// Draw from `N(mean, sd²)` restricted to `[0, ∞)`.
///
/// Plain rejection when the truncation point is at most one sd above the
/// mean, otherwise Robert's translated-exponential proposal.
pub fn sample_truncated_normal<R: Rng + ?Sized>(rng: &mut R, mean: f64, sd: f64) -> f64 {
    let alpha = -mean / sd;
    if alpha <= 1.0 {
        loop {
            let z: f64 = rng.sample(StandardNormal);
            if z >= alpha {
                return mean + sd * z;
            }
        }
    }
    let rate = 0.5 * (alpha + (alpha * alpha + 4.0).sqrt());
    loop {
        let e: f64 = rng.sample(Exp1);
        let z = alpha + e / rate;
        let u: f64 = rng.random();
        if u <= (-0.5 * (z - rate).powi(2)).exp() {
            return mean + sd * z;
        }
    }
}

/// Checked form of [`hurdle_ln_pdf`].
pub fn hurdle_lognormal_logpdf<T: Real>(x: T, params: &HurdleLognormal<T>) -> Result<T> {
    params.ln_pdf(x)
}

impl From<HurdleLognormal<f64>> for Family<f64> {
    fn from(h: HurdleLognormal<f64>) -> Self {
        Family::Hurdle(h)
    }
}
