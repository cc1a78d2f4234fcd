//! No-U-Turn Hamiltonian Monte Carlo with staged warmup adaptation.
//!
//! Trajectories are built by repeated doubling with multinomial sampling
//! across the trajectory and the generalized U-turn criterion, including the
//! extra checks across merged subtrees. Warmup tunes the step size by dual
//! averaging and a diagonal inverse metric from doubling variance windows.

use std::io::Write;

use log::debug;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::posterior::JointDensity;
use crate::stats;

/// A differentiable log-density on unconstrained `R^d`.
pub trait LogDensity: Sync {
    fn dim(&self) -> usize;

    /// Log density at `x`, writing its gradient into `grad`.
    fn logp_grad(&self, x: &[f64], grad: &mut [f64]) -> f64;

    /// Values recorded for a draw.
    fn constrain(&self, x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }

    fn param_names(&self) -> Vec<String> {
        (0..self.dim()).map(|i| format!("x{i}")).collect()
    }

    /// Random starting point for a chain.
    fn initial_point(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..self.dim()).map(|_| rng.random_range(-2.0..2.0)).collect()
    }
}

impl LogDensity for JointDensity {
    fn dim(&self) -> usize {
        JointDensity::dim(self)
    }
    fn logp_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        JointDensity::logp_grad(self, x, grad)
    }
    fn constrain(&self, x: &[f64]) -> Vec<f64> {
        JointDensity::constrain(self, x)
    }
    fn param_names(&self) -> Vec<String> {
        JointDensity::param_names(self)
    }
    fn initial_point(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.prior_draw(rng)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NutsConfig {
    pub n_chains: usize,
    /// Iterations per chain, warmup included.
    pub n_iter: usize,
    pub n_warmup: usize,
    pub target_accept: f64,
    pub max_tree_depth: usize,
    pub seed: u64,
}

impl Default for NutsConfig {
    fn default() -> Self {
        NutsConfig { n_chains: 4, n_iter: 8000, n_warmup: 2000, target_accept: 0.95, max_tree_depth: 12, seed: 0 }
    }
}

impl NutsConfig {
    /// The lighter settings used for replicated experiments.
    pub fn reduced(seed: u64) -> Self {
        NutsConfig { n_iter: 2000, n_warmup: 500, seed, ..Default::default() }
    }

    pub fn check(&self) -> Result<()> {
        if self.n_chains == 0 {
            return Err(Error::InvalidArgument("n_chains must be positive".into()));
        }
        if self.n_warmup >= self.n_iter {
            return Err(Error::InvalidArgument("n_warmup must be smaller than n_iter".into()));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(Error::InvalidArgument("target_accept must lie in (0, 1)".into()));
        }
        if self.max_tree_depth == 0 {
            return Err(Error::InvalidArgument("max_tree_depth must be at least 1".into()));
        }
        Ok(())
    }
}

/// Post-warmup output of one chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainOutput {
    /// One row per draw, constrained values in parameter-name order.
    pub draws: Vec<Vec<f64>>,
    pub divergent: Vec<bool>,
    pub tree_depth: Vec<usize>,
    pub accept_stat: Vec<f64>,
    pub energy: Vec<f64>,
    /// Step size after each warmup iteration, then the adapted value.
    pub step_size_history: Vec<f64>,
    pub step_size: f64,
    pub inv_metric: Vec<f64>,
}

/// Output of all chains.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    pub names: Vec<String>,
    pub chains: Vec<ChainOutput>,
}

/// Divergent fraction above which a run is reported as a diagnostic failure.
pub const MAX_DIVERGENT_FRACTION: f64 = 0.25;

impl Fit {
    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Draws of one parameter per chain.
    pub fn chain_columns(&self, j: usize) -> Vec<Vec<f64>> {
        self.chains.iter().map(|c| c.draws.iter().map(|d| d[j]).collect()).collect()
    }

    /// Pooled draws of a named parameter.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.index_of(name)?;
        Some(self.chains.iter().flat_map(|c| c.draws.iter().map(move |d| d[j])).collect())
    }

    pub fn n_draws(&self) -> usize {
        self.chains.iter().map(|c| c.draws.len()).sum()
    }

    pub fn n_divergent(&self) -> usize {
        self.chains.iter().map(|c| c.divergent.iter().filter(|d| **d).count()).sum()
    }

    pub fn divergence_rate(&self) -> f64 {
        self.n_divergent() as f64 / self.n_draws().max(1) as f64
    }

    pub fn mean_accept_stat(&self) -> f64 {
        let all: Vec<f64> = self.chains.iter().flat_map(|c| c.accept_stat.iter().copied()).collect();
        stats::mean(&all)
    }

    pub fn diagnostic_failure(&self) -> bool {
        self.divergence_rate() > MAX_DIVERGENT_FRACTION
    }

    /// `Err(DiagnosticFailure)` when too many transitions diverged.
    pub fn ensure_healthy(&self) -> Result<()> {
        if self.diagnostic_failure() {
            return Err(Error::DiagnosticFailure { rate: self.divergence_rate() });
        }
        Ok(())
    }

    /// Every draw as one parameter vector, chain-major.
    pub fn rows(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.chains.iter().flat_map(|c| c.draws.iter())
    }

    /// CSV with a `chain` column followed by the parameter names.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "chain,{}", self.names.join(","))?;
        for (c, chain) in self.chains.iter().enumerate() {
            for d in &chain.draws {
                let row: Vec<String> = d.iter().map(|v| format!("{v}")).collect();
                writeln!(w, "{c},{}", row.join(","))?;
            }
        }
        Ok(())
    }
}

#[derive(Clone)]
struct State {
    q: Vec<f64>,
    p: Vec<f64>,
    grad: Vec<f64>,
    logp: f64,
}

struct Hamiltonian<'a, D: LogDensity + ?Sized> {
    density: &'a D,
    inv_metric: Vec<f64>,
}

impl<D: LogDensity + ?Sized> Hamiltonian<'_, D> {
    fn kinetic(&self, p: &[f64]) -> f64 {
        0.5 * p.iter().zip(&self.inv_metric).map(|(pi, m)| pi * pi * m).sum::<f64>()
    }

    fn energy(&self, z: &State) -> f64 {
        let h = -z.logp + self.kinetic(&z.p);
        if h.is_nan() {
            f64::INFINITY
        } else {
            h
        }
    }

    fn p_sharp(&self, p: &[f64]) -> Vec<f64> {
        p.iter().zip(&self.inv_metric).map(|(pi, m)| pi * m).collect()
    }

    fn sample_momentum(&self, z: &mut State, rng: &mut ChaCha8Rng) {
        for (pi, m) in z.p.iter_mut().zip(&self.inv_metric) {
            let n: f64 = rng.sample(StandardNormal);
            *pi = n / m.sqrt();
        }
    }

    fn leapfrog(&self, z: &mut State, eps: f64) {
        for (p, g) in z.p.iter_mut().zip(&z.grad) {
            *p += 0.5 * eps * g;
        }
        for ((q, p), m) in z.q.iter_mut().zip(&z.p).zip(&self.inv_metric) {
            *q += eps * m * p;
        }
        z.logp = self.density.logp_grad(&z.q, &mut z.grad);
        if !z.logp.is_finite() {
            z.logp = f64::NEG_INFINITY;
            return;
        }
        for (p, g) in z.p.iter_mut().zip(&z.grad) {
            *p += 0.5 * eps * g;
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

const MAX_DELTA_H: f64 = 1000.0;

/// Mutable bookkeeping of one trajectory.
struct Trajectory {
    n_leapfrog: usize,
    sum_metro_prob: f64,
    divergent: bool,
}

struct Tree<'a, 'h, D: LogDensity + ?Sized> {
    ham: &'h Hamiltonian<'a, D>,
    eps: f64,
    h0: f64,
    z: State,
    traj: Trajectory,
}

/// Endpoint momenta and summed momentum of a subtree.
struct Edges {
    p_beg: Vec<f64>,
    p_sharp_beg: Vec<f64>,
    p_end: Vec<f64>,
    p_sharp_end: Vec<f64>,
    rho: Vec<f64>,
}

impl<D: LogDensity + ?Sized> Tree<'_, '_, D> {
    /// Build a subtree of `2^depth` steps from the current integrator state.
    /// Returns `None` when the subtree diverged or turned back on itself.
    fn build(&mut self, depth: usize, sign: f64, rng: &mut ChaCha8Rng, log_sum_weight: &mut f64) -> Option<(State, Edges)> {
        if depth == 0 {
            self.ham.leapfrog(&mut self.z, sign * self.eps);
            self.traj.n_leapfrog += 1;
            let h = self.ham.energy(&self.z);
            if h - self.h0 > MAX_DELTA_H {
                self.traj.divergent = true;
            }
            *log_sum_weight = log_sum_exp(*log_sum_weight, self.h0 - h);
            self.traj.sum_metro_prob += if self.h0 - h > 0.0 { 1.0 } else { (self.h0 - h).exp() };
            if self.traj.divergent {
                return None;
            }
            let ps = self.ham.p_sharp(&self.z.p);
            let edges = Edges {
                p_beg: self.z.p.clone(),
                p_sharp_beg: ps.clone(),
                p_end: self.z.p.clone(),
                p_sharp_end: ps,
                rho: self.z.p.clone(),
            };
            return Some((self.z.clone(), edges));
        }

        let mut lsw_init = f64::NEG_INFINITY;
        let (propose_init, init) = self.build(depth - 1, sign, rng, &mut lsw_init)?;
        let mut lsw_final = f64::NEG_INFINITY;
        let (propose_final, fin) = self.build(depth - 1, sign, rng, &mut lsw_final)?;

        let lsw_subtree = log_sum_exp(lsw_init, lsw_final);
        *log_sum_weight = log_sum_exp(*log_sum_weight, lsw_subtree);
        let propose = if lsw_final > lsw_subtree || rng.random::<f64>() < (lsw_final - lsw_subtree).exp() {
            propose_final
        } else {
            propose_init
        };

        let rho = add(&init.rho, &fin.rho);
        let mut persist = no_u_turn(&init.p_sharp_beg, &fin.p_sharp_end, &rho);
        let rho_ext = add(&init.rho, &fin.p_beg);
        persist &= no_u_turn(&init.p_sharp_beg, &fin.p_sharp_beg, &rho_ext);
        let rho_ext = add(&fin.rho, &init.p_end);
        persist &= no_u_turn(&init.p_sharp_end, &fin.p_sharp_end, &rho_ext);
        if !persist {
            return None;
        }
        Some((
            propose,
            Edges { p_beg: init.p_beg, p_sharp_beg: init.p_sharp_beg, p_end: fin.p_end, p_sharp_end: fin.p_sharp_end, rho },
        ))
    }
}

struct Transition {
    state: State,
    depth: usize,
    accept_stat: f64,
    divergent: bool,
    energy: f64,
}

fn transition<D: LogDensity + ?Sized>(
    ham: &Hamiltonian<'_, D>,
    current: &State,
    eps: f64,
    max_depth: usize,
    rng: &mut ChaCha8Rng,
) -> Transition {
    let mut z0 = current.clone();
    ham.sample_momentum(&mut z0, rng);
    let h0 = ham.energy(&z0);
    let p_sharp0 = ham.p_sharp(&z0.p);

    // both trajectory ends start at the initial point
    let mut fwd = (z0.clone(), z0.p.clone(), p_sharp0.clone());
    let mut bck = (z0.clone(), z0.p.clone(), p_sharp0.clone());
    // inner edges next to the initial point on each side
    let mut p_fwd_bck = z0.p.clone();
    let mut p_sharp_fwd_bck = p_sharp0.clone();
    let mut p_bck_fwd = z0.p.clone();
    let mut p_sharp_bck_fwd = p_sharp0.clone();
    let mut rho = z0.p.clone();

    let mut sample = z0.clone();
    let mut log_sum_weight = 0.0;
    let mut traj = Trajectory { n_leapfrog: 0, sum_metro_prob: 0.0, divergent: false };
    let mut depth = 0;

    while depth < max_depth {
        let forward = rng.random::<f64>() > 0.5;
        let start = if forward { fwd.0.clone() } else { bck.0.clone() };
        let mut tree = Tree { ham, eps, h0, z: start, traj };
        let mut lsw_subtree = f64::NEG_INFINITY;
        let sign = if forward { 1.0 } else { -1.0 };
        let built = tree.build(depth, sign, rng, &mut lsw_subtree);
        traj = tree.traj;
        let Some((propose, e)) = built else {
            break;
        };
        let (rho_fwd, rho_bck);
        if forward {
            rho_bck = rho.clone();
            rho_fwd = e.rho;
            p_bck_fwd = p_fwd_bck.clone();
            p_sharp_bck_fwd = p_sharp_fwd_bck.clone();
            p_fwd_bck = e.p_beg;
            p_sharp_fwd_bck = e.p_sharp_beg;
            fwd = (tree.z, e.p_end, e.p_sharp_end);
        } else {
            rho_fwd = rho.clone();
            rho_bck = e.rho;
            p_fwd_bck = p_bck_fwd.clone();
            p_sharp_fwd_bck = p_sharp_bck_fwd.clone();
            p_bck_fwd = e.p_beg;
            p_sharp_bck_fwd = e.p_sharp_beg;
            bck = (tree.z, e.p_end, e.p_sharp_end);
        }
        depth += 1;

        if lsw_subtree > log_sum_weight || rng.random::<f64>() < (lsw_subtree - log_sum_weight).exp() {
            sample = propose;
        }
        log_sum_weight = log_sum_exp(log_sum_weight, lsw_subtree);

        rho = add(&rho_bck, &rho_fwd);
        let (p_sharp_bck_bck, p_sharp_fwd_fwd) = (&bck.2, &fwd.2);
        let mut persist = no_u_turn(p_sharp_bck_bck, p_sharp_fwd_fwd, &rho);
        let rho_ext = add(&rho_bck, &p_fwd_bck);
        persist &= no_u_turn(p_sharp_bck_bck, &p_sharp_fwd_bck, &rho_ext);
        let rho_ext = add(&rho_fwd, &p_bck_fwd);
        persist &= no_u_turn(&p_sharp_bck_fwd, p_sharp_fwd_fwd, &rho_ext);
        if !persist {
            break;
        }
    }

    let energy = ham.energy(&sample);
    Transition {
        state: sample,
        depth,
        accept_stat: if traj.n_leapfrog > 0 { traj.sum_metro_prob / traj.n_leapfrog as f64 } else { 0.0 },
        divergent: traj.divergent,
        energy,
    }
}

/// Nesterov dual averaging of `ln(step size)`.
struct DualAveraging {
    mu: f64,
    delta: f64,
    counter: f64,
    s_bar: f64,
    x_bar: f64,
}

impl DualAveraging {
    const GAMMA: f64 = 0.05;
    const T0: f64 = 10.0;
    const KAPPA: f64 = 0.75;

    fn new(delta: f64, eps: f64) -> Self {
        DualAveraging { mu: (10.0 * eps).ln(), delta, counter: 0.0, s_bar: 0.0, x_bar: 0.0 }
    }

    fn restart(&mut self, eps: f64) {
        self.mu = (10.0 * eps).ln();
        self.counter = 0.0;
        self.s_bar = 0.0;
        self.x_bar = 0.0;
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

/// Welford running variance.
struct Welford {
    n: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Welford {
    fn new(d: usize) -> Self {
        Welford { n: 0, mean: vec![0.0; d], m2: vec![0.0; d] }
    }

    fn add(&mut self, x: &[f64]) {
        self.n += 1;
        for ((m, s), v) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(x) {
            let d = v - *m;
            *m += d / self.n as f64;
            *s += d * (v - *m);
        }
    }

    fn variance(&self) -> Vec<f64> {
        self.m2.iter().map(|s| s / (self.n as f64 - 1.0)).collect()
    }
}

/// Doubling-window schedule for metric adaptation.
struct Windows {
    num_warmup: usize,
    init_buffer: usize,
    term_buffer: usize,
    window_size: usize,
    next_window: usize,
    counter: usize,
    enabled: bool,
}

impl Windows {
    fn new(num_warmup: usize) -> Self {
        let (mut init, mut term, mut base) = (75, 50, 25);
        let enabled = num_warmup >= 20;
        if enabled && init + base + term > num_warmup {
            init = (0.15 * num_warmup as f64) as usize;
            term = (0.1 * num_warmup as f64) as usize;
            base = num_warmup - (init + term);
        }
        Windows {
            num_warmup,
            init_buffer: init,
            term_buffer: term,
            window_size: base,
            next_window: init + base - 1,
            counter: 0,
            enabled,
        }
    }

    fn in_window(&self) -> bool {
        self.enabled
            && self.counter >= self.init_buffer
            && self.counter < self.num_warmup - self.term_buffer
            && self.counter != self.num_warmup
    }

    fn window_end(&self) -> bool {
        self.enabled && self.counter == self.next_window && self.counter != self.num_warmup
    }

    fn advance_window(&mut self) {
        if self.next_window == self.num_warmup - self.term_buffer - 1 {
            return;
        }
        self.window_size *= 2;
        self.next_window = self.counter + self.window_size;
        if self.next_window != self.num_warmup - self.term_buffer - 1 {
            let boundary = self.next_window + 2 * self.window_size;
            if boundary >= self.num_warmup - self.term_buffer {
                self.next_window = self.num_warmup - self.term_buffer - 1;
            }
        }
    }
}

/// Heuristic initial step size: double or halve until one leapfrog step
/// crosses an acceptance probability of 0.8.
fn init_step_size<D: LogDensity + ?Sized>(ham: &Hamiltonian<'_, D>, z: &State, mut eps: f64, rng: &mut ChaCha8Rng) -> Result<f64> {
    let trial = |eps: f64, rng: &mut ChaCha8Rng| {
        let mut w = z.clone();
        ham.sample_momentum(&mut w, rng);
        let h0 = ham.energy(&w);
        ham.leapfrog(&mut w, eps);
        h0 - ham.energy(&w)
    };
    let threshold = 0.8f64.ln();
    let up = trial(eps, rng) > threshold;
    loop {
        let dh = trial(eps, rng);
        if up && !(dh > threshold) || !up && !(dh < threshold) {
            return Ok(eps);
        }
        eps = if up { 2.0 * eps } else { 0.5 * eps };
        if eps > 1e7 {
            return Err(Error::StepSize("posterior is improper; step size grew without bound".into()));
        }
        if eps == 0.0 {
            return Err(Error::StepSize("no acceptably small step size".into()));
        }
    }
}

fn chain_rng(seed: u64, chain: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain as u64);
    rng
}

fn initialize<D: LogDensity + ?Sized>(density: &D, rng: &mut ChaCha8Rng, chain: usize) -> Result<State> {
    let d = density.dim();
    for _ in 0..100 {
        let q = density.initial_point(rng);
        let mut grad = vec![0.0; d];
        let logp = density.logp_grad(&q, &mut grad);
        if logp.is_finite() && grad.iter().all(|g| g.is_finite()) {
            return Ok(State { q, p: vec![0.0; d], grad, logp });
        }
    }
    Err(Error::Initialization(chain))
}

/// Run one chain with warmup adaptation.
pub fn run_chain<D: LogDensity + ?Sized>(density: &D, cfg: &NutsConfig, chain: usize) -> Result<ChainOutput> {
    let mut rng = chain_rng(cfg.seed, chain);
    let d = density.dim();
    let mut z = initialize(density, &mut rng, chain)?;
    let mut ham = Hamiltonian { density, inv_metric: vec![1.0; d] };
    let mut eps = init_step_size(&ham, &z, 1.0, &mut rng)?;
    let mut da = DualAveraging::new(cfg.target_accept, eps);
    let mut windows = Windows::new(cfg.n_warmup);
    let mut est = Welford::new(d);

    let n_keep = cfg.n_iter - cfg.n_warmup;
    let mut out = ChainOutput {
        draws: Vec::with_capacity(n_keep),
        divergent: Vec::with_capacity(n_keep),
        tree_depth: Vec::with_capacity(n_keep),
        accept_stat: Vec::with_capacity(n_keep),
        energy: Vec::with_capacity(n_keep),
        step_size_history: Vec::with_capacity(cfg.n_warmup + 1),
        step_size: eps,
        inv_metric: vec![],
    };

    for it in 0..cfg.n_iter {
        let t = transition(&ham, &z, eps, cfg.max_tree_depth, &mut rng);
        z = t.state;
        if it < cfg.n_warmup {
            eps = da.learn(t.accept_stat);
            if windows.in_window() {
                est.add(&z.q);
            }
            if windows.window_end() {
                windows.advance_window();
                let n = est.n as f64;
                ham.inv_metric = est.variance().into_iter().map(|v| (n / (n + 5.0)) * v + 1e-3 * (5.0 / (n + 5.0))).collect();
                est = Welford::new(d);
                eps = init_step_size(&ham, &z, eps, &mut rng)?;
                da.restart(eps);
                debug!("chain {chain}: metric update at iteration {it}, step size {eps:.4}");
            }
            windows.counter += 1;
            out.step_size_history.push(eps);
            if it + 1 == cfg.n_warmup {
                eps = da.final_step();
                out.step_size_history.push(eps);
            }
        } else {
            out.draws.push(density.constrain(&z.q));
            out.divergent.push(t.divergent);
            out.tree_depth.push(t.depth);
            out.accept_stat.push(t.accept_stat);
            out.energy.push(t.energy);
        }
    }
    out.step_size = eps;
    out.inv_metric = ham.inv_metric;
    Ok(out)
}

/// Run all chains in parallel; results are ordered by chain index.
pub fn run_nuts<D: LogDensity + ?Sized>(density: &D, cfg: &NutsConfig) -> Result<Fit> {
    cfg.check()?;
    let chains: Result<Vec<ChainOutput>> = (0..cfg.n_chains).into_par_iter().map(|c| run_chain(density, cfg, c)).collect();
    let fit = Fit { names: density.param_names(), chains: chains? };
    if fit.diagnostic_failure() {
        log::warn!("{:.1}% of transitions diverged", 100.0 * fit.divergence_rate());
    }
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct StdNormal(usize);

    impl LogDensity for StdNormal {
        fn dim(&self) -> usize {
            self.0
        }
        fn logp_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
            for (g, v) in grad.iter_mut().zip(x) {
                *g = -v;
            }
            -0.5 * dot(x, x)
        }
    }

    #[test]
    fn window_schedule_matches_staged_warmup() {
        let mut w = Windows::new(1000);
        let mut ends = vec![];
        for _ in 0..1000 {
            if w.window_end() {
                ends.push(w.counter);
                w.advance_window();
            }
            w.counter += 1;
        }
        assert_eq!(ends, vec![99, 149, 249, 449, 949]);
        let short = Windows::new(100);
        assert_eq!((short.init_buffer, short.term_buffer, short.window_size), (15, 10, 75));
    }

    #[test]
    fn dual_averaging_moves_toward_target() {
        let mut da = DualAveraging::new(0.8, 1.0);
        let small = da.learn(0.2);
        let mut db = DualAveraging::new(0.8, 1.0);
        let big = db.learn(1.0);
        assert!(big > small);
    }

    #[test]
    fn config_validation() {
        assert!(NutsConfig { n_warmup: 10, n_iter: 10, ..Default::default() }.check().is_err());
        assert!(NutsConfig { target_accept: 1.0, ..Default::default() }.check().is_err());
        assert!(NutsConfig { max_tree_depth: 0, ..Default::default() }.check().is_err());
        assert!(NutsConfig::default().check().is_ok());
    }

    #[test]
    fn short_run_is_deterministic() {
        let cfg = NutsConfig { n_chains: 2, n_iter: 300, n_warmup: 150, seed: 3, ..Default::default() };
        let a = run_nuts(&StdNormal(3), &cfg).unwrap();
        let b = run_nuts(&StdNormal(3), &cfg).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.chains[0].draws, a.chains[1].draws);
        assert_eq!(a.chains[0].draws.len(), 150);
    }
}
