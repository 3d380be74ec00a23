//! Multinomial No-U-Turn sampler with a diagonal metric.
//!
//! Follows the trajectory-building scheme of Stan's `base_nuts`: biased
//! progressive sampling between subtrees, uniform multinomial sampling within
//! them, and the generalized U-turn criterion checked across merged subtrees.

use rand::Rng;
use rand_distr::StandardNormal;

use super::{ChainRun, ChainStats, LogDensity, SamplerConfig, WarmupSchedule, Welford};
use crate::error::{Error, Result};
use crate::rng::StreamRng;

const MAX_DELTA_H: f64 = 1000.0;

#[derive(Clone)]
struct State {
    q: Vec<f64>,
    p: Vec<f64>,
    grad: Vec<f64>,
    lp: f64,
}

struct Hamiltonian<'a, L: ?Sized> {
    target: &'a L,
    inv_mass: Vec<f64>,
    n_grad: usize,
}

impl<L: LogDensity + ?Sized> Hamiltonian<'_, L> {
    fn update(&mut self, s: &mut State) {
        self.n_grad += 1;
        s.lp = self
            .target
            .log_density_and_grad(&s.q, &mut s.grad)
            .expect("gradient checked by the driver");
        if !s.lp.is_finite() || s.grad.iter().any(|g| !g.is_finite()) {
            s.lp = f64::NEG_INFINITY;
        }
    }

    fn kinetic(&self, p: &[f64]) -> f64 {
        0.5 * p.iter().zip(&self.inv_mass).map(|(pi, m)| m * pi * pi).sum::<f64>()
    }

    fn energy(&self, s: &State) -> f64 {
        -s.lp + self.kinetic(&s.p)
    }

    fn velocity(&self, p: &[f64], out: &mut [f64]) {
        for ((o, pi), m) in out.iter_mut().zip(p).zip(&self.inv_mass) {
            *o = m * pi;
        }
    }

    fn leapfrog(&mut self, s: &mut State, eps: f64) {
        for (p, g) in s.p.iter_mut().zip(&s.grad) {
            *p += 0.5 * eps * g;
        }
        for ((q, p), m) in s.q.iter_mut().zip(&s.p).zip(&self.inv_mass) {
            *q += eps * m * p;
        }
        self.update(s);
        if s.lp.is_finite() {
            for (p, g) in s.p.iter_mut().zip(&s.grad) {
                *p += 0.5 * eps * g;
            }
        }
    }

    fn resample_momentum(&self, s: &mut State, rng: &mut StreamRng) {
        for (p, m) in s.p.iter_mut().zip(&self.inv_mass) {
            let z: f64 = rng.sample(StandardNormal);
            *p = z / m.sqrt();
        }
    }
}

fn log_sum_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn no_u_turn(p_sharp_minus: &[f64], p_sharp_plus: &[f64], rho: &[f64]) -> bool {
    dot(p_sharp_plus, rho) > 0.0 && dot(p_sharp_minus, rho) > 0.0
}

struct TreeCtx<'r> {
    h0: f64,
    eps: f64,
    n_leapfrog: usize,
    sum_metro_prob: f64,
    divergent: bool,
    rng: &'r mut StreamRng,
}

/// Edge momenta of a (sub)trajectory.
struct Edges {
    p_sharp_beg: Vec<f64>,
    p_sharp_end: Vec<f64>,
    p_beg: Vec<f64>,
    p_end: Vec<f64>,
}

impl Edges {
    fn zeros(dim: usize) -> Self {
        Self {
            p_sharp_beg: vec![0.0; dim],
            p_sharp_end: vec![0.0; dim],
            p_beg: vec![0.0; dim],
            p_end: vec![0.0; dim],
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn build_tree<L: LogDensity + ?Sized>(
    ham: &mut Hamiltonian<'_, L>,
    ctx: &mut TreeCtx<'_>,
    depth: usize,
    z: &mut State,
    z_propose: &mut State,
    edges: &mut Edges,
    rho: &mut [f64],
    log_sum_weight: &mut f64,
) -> bool {
    if depth == 0 {
        ham.leapfrog(z, ctx.eps);
        ctx.n_leapfrog += 1;
        let mut h = ham.energy(z);
        if h.is_nan() {
            h = f64::INFINITY;
        }
        if h - ctx.h0 > MAX_DELTA_H {
            ctx.divergent = true;
        }
        *log_sum_weight = log_sum_exp(*log_sum_weight, ctx.h0 - h);
        ctx.sum_metro_prob += if ctx.h0 - h > 0.0 { 1.0 } else { (ctx.h0 - h).exp() };
        z_propose.clone_from(z);
        for (r, p) in rho.iter_mut().zip(&z.p) {
            *r += p;
        }
        ham.velocity(&z.p, &mut edges.p_sharp_beg);
        edges.p_sharp_end.clone_from(&edges.p_sharp_beg);
        edges.p_beg.clone_from(&z.p);
        edges.p_end.clone_from(&z.p);
        return !ctx.divergent;
    }

    let dim = z.q.len();
    // initial subtree
    let mut lsw_init = f64::NEG_INFINITY;
    let mut init_edges = Edges::zeros(dim);
    let mut rho_init = vec![0.0; dim];
    if !build_tree(ham, ctx, depth - 1, z, z_propose, &mut init_edges, &mut rho_init, &mut lsw_init) {
        return false;
    }
    // final subtree
    let mut z_propose_final = z.clone();
    let mut lsw_final = f64::NEG_INFINITY;
    let mut final_edges = Edges::zeros(dim);
    let mut rho_final = vec![0.0; dim];
    if !build_tree(
        ham,
        ctx,
        depth - 1,
        z,
        &mut z_propose_final,
        &mut final_edges,
        &mut rho_final,
        &mut lsw_final,
    ) {
        return false;
    }

    let lsw_subtree = log_sum_exp(lsw_init, lsw_final);
    *log_sum_weight = log_sum_exp(*log_sum_weight, lsw_subtree);
    if lsw_final > lsw_subtree {
        *z_propose = z_propose_final;
    } else {
        let accept = (lsw_final - lsw_subtree).exp();
        if ctx.rng.random::<f64>() < accept {
            *z_propose = z_propose_final;
        }
    }

    let rho_subtree = add(&rho_init, &rho_final);
    for (r, s) in rho.iter_mut().zip(&rho_subtree) {
        *r += s;
    }
    let mut persist = no_u_turn(&init_edges.p_sharp_beg, &final_edges.p_sharp_end, &rho_subtree);
    let rho_ext = add(&rho_init, &final_edges.p_beg);
    persist &= no_u_turn(&init_edges.p_sharp_beg, &final_edges.p_sharp_beg, &rho_ext);
    let rho_ext = add(&rho_final, &init_edges.p_end);
    persist &= no_u_turn(&init_edges.p_sharp_end, &final_edges.p_sharp_end, &rho_ext);

    edges.p_sharp_beg = init_edges.p_sharp_beg;
    edges.p_beg = init_edges.p_beg;
    edges.p_sharp_end = final_edges.p_sharp_end;
    edges.p_end = final_edges.p_end;
    persist
}

struct Transition {
    accept_stat: f64,
    depth: usize,
    divergent: bool,
}

fn transition<L: LogDensity + ?Sized>(
    ham: &mut Hamiltonian<'_, L>,
    current: &mut State,
    eps: f64,
    max_depth: usize,
    rng: &mut StreamRng,
) -> Transition {
    let dim = current.q.len();
    ham.resample_momentum(current, rng);
    let h0 = ham.energy(current);

    let mut z_fwd = current.clone();
    let mut z_bck = current.clone();
    let mut z_sample = current.clone();
    let mut z_propose = current.clone();

    let mut p_sharp = vec![0.0; dim];
    ham.velocity(&current.p, &mut p_sharp);
    // forward edge (bck = inner, fwd = outer) and backward edge
    let mut fwd = Edges {
        p_sharp_beg: p_sharp.clone(),
        p_sharp_end: p_sharp.clone(),
        p_beg: current.p.clone(),
        p_end: current.p.clone(),
    };
    let mut bck = Edges {
        p_sharp_beg: p_sharp.clone(),
        p_sharp_end: p_sharp,
        p_beg: current.p.clone(),
        p_end: current.p.clone(),
    };
    let mut rho = current.p.clone();
    let mut log_sum_weight = 0.0;

    let mut ctx = TreeCtx {
        h0,
        eps,
        n_leapfrog: 0,
        sum_metro_prob: 0.0,
        divergent: false,
        rng,
    };
    let mut depth = 0;
    while depth < max_depth {
        let mut rho_fwd = vec![0.0; dim];
        let mut rho_bck = vec![0.0; dim];
        let mut lsw_subtree = f64::NEG_INFINITY;
        let valid;
        if ctx.rng.random::<f64>() > 0.5 {
            rho_bck.clone_from(&rho);
            bck.p_beg.clone_from(&fwd.p_end);
            bck.p_sharp_beg.clone_from(&fwd.p_sharp_end);
            ctx.eps = eps;
            valid = build_tree(ham, &mut ctx, depth, &mut z_fwd, &mut z_propose, &mut fwd, &mut rho_fwd, &mut lsw_subtree);
        } else {
            rho_fwd.clone_from(&rho);
            fwd.p_beg.clone_from(&bck.p_end);
            fwd.p_sharp_beg.clone_from(&bck.p_sharp_end);
            ctx.eps = -eps;
            valid = build_tree(ham, &mut ctx, depth, &mut z_bck, &mut z_propose, &mut bck, &mut rho_bck, &mut lsw_subtree);
        }
        if !valid {
            break;
        }
        depth += 1;

        if lsw_subtree > log_sum_weight {
            z_sample.clone_from(&z_propose);
        } else {
            let accept = (lsw_subtree - log_sum_weight).exp();
            if ctx.rng.random::<f64>() < accept {
                z_sample.clone_from(&z_propose);
            }
        }
        log_sum_weight = log_sum_exp(log_sum_weight, lsw_subtree);

        rho = add(&rho_bck, &rho_fwd);
        // bck.p_*_end is the backward outer edge, fwd.p_*_end the forward one;
        // *_beg hold the inner edges adjacent to the join.
        let mut persist = no_u_turn(&bck.p_sharp_end, &fwd.p_sharp_end, &rho);
        let rho_ext = add(&rho_bck, &fwd.p_beg);
        persist &= no_u_turn(&bck.p_sharp_end, &fwd.p_sharp_beg, &rho_ext);
        let rho_ext = add(&rho_fwd, &bck.p_beg);
        persist &= no_u_turn(&bck.p_sharp_beg, &fwd.p_sharp_end, &rho_ext);
        if !persist {
            break;
        }
    }

    let accept_stat = if ctx.n_leapfrog > 0 {
        ctx.sum_metro_prob / ctx.n_leapfrog as f64
    } else {
        0.0
    };
    let divergent = ctx.divergent;
    *current = z_sample;
    Transition {
        accept_stat,
        depth,
        divergent,
    }
}

/// Stan's heuristic: double or halve until one leapfrog step crosses an
/// acceptance probability of 0.8.
fn find_reasonable_step_size<L: LogDensity + ?Sized>(
    ham: &mut Hamiltonian<'_, L>,
    current: &State,
    mut eps: f64,
    rng: &mut StreamRng,
) -> f64 {
    let log_08 = 0.8_f64.ln();
    let mut z = current.clone();
    ham.resample_momentum(&mut z, rng);
    let h0 = ham.energy(&z);
    ham.leapfrog(&mut z, eps);
    let mut h = ham.energy(&z);
    if h.is_nan() {
        h = f64::INFINITY;
    }
    let direction = if h0 - h > log_08 { 1 } else { -1 };
    for _ in 0..100 {
        let mut z = current.clone();
        ham.resample_momentum(&mut z, rng);
        let h0 = ham.energy(&z);
        ham.leapfrog(&mut z, eps);
        let mut h = ham.energy(&z);
        if h.is_nan() {
            h = f64::INFINITY;
        }
        let delta = h0 - h;
        if (direction == 1 && !(delta > log_08)) || (direction == -1 && !(delta < log_08)) {
            break;
        }
        eps = if direction == 1 { 2.0 * eps } else { 0.5 * eps };
        if !(1e-12..=1e7).contains(&eps) {
            break;
        }
    }
    eps.clamp(1e-12, 1e7)
}

struct DualAveraging {
    mu: f64,
    s_bar: f64,
    x_bar: f64,
    counter: f64,
    delta: f64,
}

impl DualAveraging {
    const GAMMA: f64 = 0.05;
    const T0: f64 = 10.0;
    const KAPPA: f64 = 0.75;

    fn new(eps: f64, delta: f64) -> Self {
        Self {
            mu: (10.0 * eps).ln(),
            s_bar: 0.0,
            x_bar: 0.0,
            counter: 0.0,
            delta,
        }
    }

    fn restart(&mut self, eps: f64) {
        *self = Self::new(eps, self.delta);
    }

    fn learn(&mut self, accept_stat: f64) -> f64 {
        self.counter += 1.0;
        let a = accept_stat.min(1.0);
        let eta = 1.0 / (self.counter + Self::T0);
        self.s_bar = (1.0 - eta) * self.s_bar + eta * (self.delta - a);
        let x = self.mu - self.s_bar * self.counter.sqrt() / Self::GAMMA;
        let x_eta = self.counter.powf(-Self::KAPPA);
        self.x_bar = (1.0 - x_eta) * self.x_bar + x_eta * x;
        x.exp()
    }

    fn final_step(&self) -> f64 {
        self.x_bar.exp()
    }
}

pub(super) fn run_chain<L: LogDensity + ?Sized>(
    target: &L,
    start: Vec<f64>,
    config: &SamplerConfig,
    chain: usize,
    rng: &mut StreamRng,
) -> Result<ChainRun> {
    let dim = target.dim();
    let mut ham = Hamiltonian {
        target,
        inv_mass: vec![1.0; dim],
        n_grad: 0,
    };
    let mut current = State {
        q: start,
        p: vec![0.0; dim],
        grad: vec![0.0; dim],
        lp: 0.0,
    };
    ham.update(&mut current);
    if !current.lp.is_finite() {
        return Err(Error::Initialization(format!(
            "chain {chain}: log density or gradient not finite at the initial point"
        )));
    }

    let schedule = WarmupSchedule::new(config.n_warmup);
    let mut eps = find_reasonable_step_size(&mut ham, &current, 1.0, rng);
    let mut adapt = DualAveraging::new(eps, config.target());
    let mut window = Welford::new(dim);
    let mut stuck = 0usize;

    for t in 0..config.n_warmup {
        let tr = transition(&mut ham, &mut current, eps, config.max_tree_depth, rng);
        stuck = if tr.accept_stat > 0.0 { 0 } else { stuck + 1 };
        if stuck >= config.stuck_window {
            return Err(Error::StuckChain {
                chain,
                window: config.stuck_window,
                log_density: current.lp,
            });
        }
        eps = adapt.learn(tr.accept_stat);
        if schedule.in_slow_window(t) {
            window.push(&current.q);
        }
        if schedule.window_closes(t) {
            ham.inv_mass = window.regularized_variance();
            window.reset();
            eps = find_reasonable_step_size(&mut ham, &current, eps, rng);
            adapt.restart(eps);
        }
    }
    eps = adapt.final_step();

    let mut draws = Vec::with_capacity(config.n_samples * dim);
    let mut accept_sum = 0.0;
    let mut depth_sum = 0usize;
    let mut n_divergent = 0usize;
    for _ in 0..config.n_samples {
        let tr = transition(&mut ham, &mut current, eps, config.max_tree_depth, rng);
        accept_sum += tr.accept_stat;
        depth_sum += tr.depth;
        n_divergent += usize::from(tr.divergent);
        draws.extend_from_slice(&current.q);
    }

    Ok(ChainRun {
        draws,
        stats: ChainStats {
            acceptance_rate: accept_sum / config.n_samples as f64,
            step_size: eps,
            n_divergent,
            mean_tree_depth: depth_sum as f64 / config.n_samples as f64,
            n_gradient_evals: ham.n_grad,
            duration_secs: 0.0,
        },
    })
}
