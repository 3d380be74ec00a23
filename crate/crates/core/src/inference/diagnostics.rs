//! Split-chain potential scale reduction and effective sample size.

use crate::error::{Error, Result};
use crate::scalar::Real;

fn check_shape<T>(chains: &[&[T]]) -> Result<usize> {
    if chains.len() < 2 {
        return Err(Error::DiagnosticUndefined(format!(
            "need at least 2 chains, got {}",
            chains.len()
        )));
    }
    let n = chains[0].len();
    if n < 4 || chains.iter().any(|c| c.len() != n) {
        return Err(Error::DiagnosticUndefined(
            "chains must have equal length of at least 4 draws".into(),
        ));
    }
    Ok(n)
}

/// Halves of every chain; an odd middle draw is dropped.
fn split<'a, T>(chains: &[&'a [T]]) -> Vec<&'a [T]> {
    chains
        .iter()
        .flat_map(|c| {
            let half = c.len() / 2;
            [&c[..half], &c[c.len() - half..]]
        })
        .collect()
}

fn mean<T: Real>(xs: &[T]) -> T {
    xs.iter().fold(T::zero(), |a, &x| a + x) / T::from_count(xs.len())
}

fn variance<T: Real>(xs: &[T], m: T) -> T {
    xs.iter().fold(T::zero(), |a, &x| a + (x - m) * (x - m)) / T::from_count(xs.len() - 1)
}

struct Moments<T> {
    means: Vec<T>,
    within: T,
    var_plus: T,
}

fn moments<T: Real>(halves: &[&[T]]) -> Result<Moments<T>> {
    let n = T::from_count(halves[0].len());
    let m = T::from_count(halves.len());
    let means: Vec<T> = halves.iter().map(|c| mean(c)).collect();
    let grand = mean(&means);
    let within = halves
        .iter()
        .zip(&means)
        .fold(T::zero(), |a, (c, &mu)| a + variance(c, mu))
        / m;
    let between_over_n = means.iter().fold(T::zero(), |a, &mu| a + (mu - grand) * (mu - grand)) / (m - T::one());
    if !(within > T::zero()) {
        return Err(Error::DiagnosticUndefined("zero within-chain variance".into()));
    }
    let var_plus = (n - T::one()) / n * within + between_over_n;
    Ok(Moments {
        means,
        within,
        var_plus,
    })
}

/// Split-chain R-hat, `sqrt(var⁺ / W)`.
pub fn r_hat<T: Real>(chains: &[&[T]]) -> Result<T> {
    check_shape(chains)?;
    let halves = split(chains);
    let m = moments(&halves)?;
    Ok((m.var_plus / m.within).sqrt())
}

/// Split-chain effective sample size with Geyer's initial monotone sequence.
pub fn ess<T: Real>(chains: &[&[T]]) -> Result<T> {
    check_shape(chains)?;
    let halves = split(chains);
    let mo = moments(&halves)?;
    let n = halves[0].len();
    let m = halves.len();

    let centered: Vec<Vec<T>> = halves
        .iter()
        .zip(&mo.means)
        .map(|(c, &mu)| c.iter().map(|&x| x - mu).collect())
        .collect();
    let nf = T::from_count(n);
    // mean over chains of the biased autocovariance at `lag`
    let acov = |lag: usize| -> T {
        let total = centered.iter().fold(T::zero(), |acc, c| {
            acc + c[..n - lag]
                .iter()
                .zip(&c[lag..])
                .fold(T::zero(), |a, (&x, &y)| a + x * y)
                / nf
        });
        total / T::from_count(m)
    };
    let rho = |lag: usize| -> T {
        let mean_acov = acov(lag);
        T::one() - (mo.within - mean_acov) / mo.var_plus
    };

    let mut sum_pairs = T::zero();
    let mut prev_pair = T::infinity();
    let mut t = 0;
    while t + 1 < n {
        let mut pair = if t == 0 {
            T::one() + rho(1)
        } else {
            rho(t) + rho(t + 1)
        };
        if pair < T::zero() {
            break;
        }
        if pair > prev_pair {
            pair = prev_pair;
        }
        sum_pairs = sum_pairs + pair;
        prev_pair = pair;
        t += 2;
    }
    let total = T::from_count(n * m);
    let tau = (T::c(-1.0) + T::c(2.0) * sum_pairs).max(T::one() / total.log10().max(T::one()));
    Ok((total / tau).min(total * total.log10()))
}
