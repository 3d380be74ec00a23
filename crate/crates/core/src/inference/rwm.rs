//! Adaptive random-walk Metropolis.
//!
//! Proposal `x' = x + λ s ⊙ z`, `z ~ N(0, I)`. During warmup the global scale
//! `λ` follows a Robbins–Monro recursion on the acceptance probability and
//! the per-coordinate scales `s` are re-estimated from the chain's own
//! variance at the end of each slow warmup window. Both are frozen after
//! warmup.

use rand::Rng;
use rand_distr::StandardNormal;

use super::{ChainRun, ChainStats, LogDensity, SamplerConfig, WarmupSchedule, Welford};
use crate::error::{Error, Result};
use crate::rng::StreamRng;

pub(super) fn run_chain<L: LogDensity + ?Sized>(
    target: &L,
    start: Vec<f64>,
    config: &SamplerConfig,
    chain: usize,
    rng: &mut StreamRng,
) -> Result<ChainRun> {
    let dim = target.dim();
    let goal = config.target();
    let schedule = WarmupSchedule::new(config.n_warmup);

    let mut x = start;
    let mut lp = target.log_density(&x);
    let mut scales = vec![1.0; dim];
    let mut log_lambda = (2.38 / (dim as f64).sqrt()).ln();
    let mut rm_step = 0usize;
    let mut window = Welford::new(dim);
    let mut rejected_run = 0usize;

    let mut proposal = vec![0.0; dim];
    let mut draws = Vec::with_capacity(config.n_samples * dim);
    let mut accept_sum = 0.0;
    let total = config.n_warmup + config.n_samples;

    for t in 0..total {
        let lambda = log_lambda.exp();
        for ((p, &xi), &s) in proposal.iter_mut().zip(&x).zip(&scales) {
            let z: f64 = rng.sample(StandardNormal);
            *p = xi + lambda * s * z;
        }
        let lp_new = target.log_density(&proposal);
        let log_ratio = lp_new - lp;
        let alpha = if log_ratio.is_nan() { 0.0 } else { log_ratio.min(0.0).exp() };
        let u: f64 = rng.random();
        let accepted = u < alpha;
        if accepted {
            x.copy_from_slice(&proposal);
            lp = lp_new;
        }

        if t < config.n_warmup {
            rejected_run = if accepted { 0 } else { rejected_run + 1 };
            if rejected_run >= config.stuck_window {
                return Err(Error::StuckChain {
                    chain,
                    window: config.stuck_window,
                    log_density: lp,
                });
            }
            rm_step += 1;
            log_lambda += (rm_step as f64).powf(-0.6) * (alpha - goal);
            if schedule.in_slow_window(t) {
                window.push(&x);
            }
            if schedule.window_closes(t) && window.count() > 10 {
                scales = window.regularized_variance().into_iter().map(f64::sqrt).collect();
                window.reset();
                log_lambda = (2.38 / (dim as f64).sqrt()).ln();
                rm_step = 0;
            }
        } else {
            accept_sum += alpha;
            draws.extend_from_slice(&x);
        }
    }

    Ok(ChainRun {
        draws,
        stats: ChainStats {
            acceptance_rate: accept_sum / config.n_samples as f64,
            step_size: log_lambda.exp(),
            n_divergent: 0,
            mean_tree_depth: 0.0,
            n_gradient_evals: 0,
            duration_secs: 0.0,
        },
    })
}
