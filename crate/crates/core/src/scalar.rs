//! Scalar abstraction shared by the density kernels, model log-posteriors
//! and diagnostics.
//!
//! Everything numeric in the crate is written against [`Real`], which is
//! blanket-implemented for `f32` and `f64`. Special functions that have no
//! generic implementation (log-gamma, the error function) are evaluated in
//! `f64` and cast back.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating-point scalar usable throughout the crate.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from `f64`; literals in kernels go through this.
    #[inline]
    fn c(v: f64) -> Self {
        Self::from_f64(v).expect("f64 constant representable")
    }

    #[inline]
    fn f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable")
    }
}

impl<T> Real for T where
    T: Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
}

/// `ln Γ(x)`.
pub fn ln_gamma<T: Real>(x: T) -> T {
    T::c(statrs::function::gamma::ln_gamma(x.f64()))
}

/// `ln B(a, b)`.
pub fn ln_beta<T: Real>(a: T, b: T) -> T {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Below this `z` the normal tail uses its asymptotic series.
const TAIL_Z: f64 = -20.0;

/// `1 - 1/z² + 3/z⁴ - 15/z⁶ + 105/z⁸`, the Mills-ratio series factor.
fn tail_series(z: f64) -> f64 {
    let u = 1.0 / (z * z);
    1.0 - u * (1.0 - u * (3.0 - u * (15.0 - 105.0 * u)))
}

/// `ln Φ(z)` for the standard normal CDF, accurate in the lower tail.
pub fn ln_std_normal_cdf<T: Real>(z: T) -> T {
    let z = z.f64();
    if z < TAIL_Z {
        return T::c(-0.5 * z * z - (-z).ln() - 0.5 * (2.0 * std::f64::consts::PI).ln() + tail_series(z).ln());
    }
    T::c((0.5 * statrs::function::erf::erfc(-z / std::f64::consts::SQRT_2)).ln())
}

/// Inverse Mills ratio `φ(z) / Φ(z)`, stable for very negative `z`.
pub fn inverse_mills<T: Real>(z: T) -> T {
    let zf = z.f64();
    if zf < TAIL_Z {
        return T::c(-zf / tail_series(zf));
    }
    let ln_phi = -0.5 * zf * zf - 0.5 * (2.0 * std::f64::consts::PI).ln();
    T::c((ln_phi - ln_std_normal_cdf(zf)).exp())
}

/// `ln(1 + e^x)` without overflow.
#[inline]
pub fn softplus<T: Real>(x: T) -> T {
    if x > T::zero() {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Logistic sigmoid `1 / (1 + e^{-x})`.
#[inline]
pub fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

#[inline]
pub fn logit<T: Real>(p: T) -> T {
    (p / (T::one() - p)).ln()
}

/// `ln(1 - e^x)` for `x ≤ 0`.
#[inline]
pub fn log1mexp<T: Real>(x: T) -> T {
    if x > -T::LN_2() {
        (-x.exp_m1()).ln()
    } else {
        (-x.exp()).ln_1p()
    }
}

/// `½ ln(2π)`.
#[inline]
pub fn half_ln_two_pi<T: Real>() -> T {
    T::c(0.918_938_533_204_672_8)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softplus_is_stable_at_extremes() {
        assert_eq!(softplus(800.0_f64), 800.0);
        assert!(softplus(-800.0_f64) >= 0.0);
        assert!((softplus(0.0_f64) - 2.0_f64.ln()).abs() < 1e-15);
        assert!((softplus(0.0_f32) - 2.0_f32.ln()).abs() < 1e-6);
    }

    #[test]
    fn sigmoid_logit_round_trip() {
        for &p in &[1e-9, 0.1, 0.5, 0.496, 0.9, 1.0 - 1e-9] {
            let back = sigmoid(logit(p));
            assert!((back - p).abs() <= 1e-12 * p.max(1e-3), "{p} -> {back}");
        }
    }

    #[test]
    fn log1mexp_matches_naive_in_safe_range() {
        for &x in &[-1e-3, -0.5, -1.0, -5.0, -30.0] {
            let naive = (1.0_f64 - x.exp()).ln();
            assert!((log1mexp(x) - naive).abs() < 1e-9);
        }
    }

    #[test]
    fn normal_log_cdf_lower_tail() {
        assert!((ln_std_normal_cdf(0.0_f64) - 0.5_f64.ln()).abs() < 1e-12);
        assert!((ln_std_normal_cdf(1.0_f64) - 0.841_344_746_068_542_9_f64.ln()).abs() < 1e-9);
        assert!(ln_std_normal_cdf(-40.0_f64).is_finite());
        // both sides of the series switch agree
        let (a, b) = (ln_std_normal_cdf(-19.999_999_f64), ln_std_normal_cdf(-20.000_001_f64));
        assert!((a - b).abs() < 1e-4 && a > b);
    }

    #[test]
    fn inverse_mills_limits() {
        assert!((inverse_mills(0.0_f64) - 2.0 * 0.398_942_280_401_432_7).abs() < 1e-12);
        assert!((inverse_mills(-30.0_f64) / 30.0 - 1.0).abs() < 2e-3);
        assert!(inverse_mills(10.0_f64) < 1e-20);
        let (a, b) = (inverse_mills(-19.999_999_f64), inverse_mills(-20.000_001_f64));
        assert!((a - b).abs() < 1e-5);
    }
}
