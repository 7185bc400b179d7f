//! Scalar-channel WMMSE power control and simple baseline allocators.
//!
//! The solver runs block coordinate descent on the weighted-MSE
//! reformulation of the weighted sum-rate problem, cycling through the
//! amplitude (`v`), receiver (`u`) and weight (`w`) blocks. Powers are
//! recovered as `p_k = v_k^2`.

use rand::Rng;

use crate::error::{check_dim, Error, Result};
use crate::instance::{PowerAllocation, ProblemInstance};
use crate::rng;

/// Floor applied to `1 - u_k |h_kk| v_k` before the weight update.
pub const W_GUARD: f64 = 1e-12;

/// Weighted sum-rate in bits: `sum_k a_k log2(1 + sinr_k)`.
pub fn sum_rate(inst: &ProblemInstance, p: &[f64]) -> Result<f64> {
    let k_n = inst.num_users();
    check_dim(k_n, p.len())?;
    let mut total = 0.0;
    for k in 0..k_n {
        let mut interference = inst.noise()[k];
        for (j, pj) in p.iter().enumerate() {
            if j != k {
                let h = inst.gain(k, j);
                interference += h * h * pj;
            }
        }
        let h = inst.gain(k, k);
        total += inst.weights()[k] * (1.0 + h * h * p[k] / interference).log2();
    }
    Ok(total)
}

/// Block variables of the weighted-MSE problem.
#[derive(Debug, Clone, PartialEq)]
pub struct WmmseState {
    pub v: Vec<f64>,
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    pub iteration: usize,
    pub objective: f64,
}

/// Per-user mean-squared errors
/// `e_k = (u_k|h_kk|v_k - 1)^2 + sum_{j!=k} (u_k|h_kj|v_j)^2 + s_k^2 u_k^2`.
pub fn mse_terms(inst: &ProblemInstance, v: &[f64], u: &[f64]) -> Result<Vec<f64>> {
    let k_n = inst.num_users();
    check_dim(k_n, v.len())?;
    check_dim(k_n, u.len())?;
    Ok((0..k_n)
        .map(|k| {
            let own = u[k] * inst.gain(k, k) * v[k] - 1.0;
            let mut e = own * own + inst.noise()[k] * u[k] * u[k];
            for j in (0..k_n).filter(|&j| j != k) {
                let x = u[k] * inst.gain(k, j) * v[j];
                e += x * x;
            }
            e
        })
        .collect())
}

/// `sum_k a_k (w_k e_k - ln w_k)`.
pub fn weighted_mse_objective(inst: &ProblemInstance, state: &WmmseState) -> Result<f64> {
    check_dim(inst.num_users(), state.w.len())?;
    if let Some(w) = state.w.iter().find(|w| !(**w > 0.0)) {
        return Err(Error::Domain(format!("weight variable w = {w} must be positive")));
    }
    let e = mse_terms(inst, &state.v, &state.u)?;
    Ok(e.iter().zip(&state.w).zip(inst.weights()).map(|((e, w), a)| a * (w * e - w.ln())).sum())
}

#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    /// `v_k = sqrt(p_max)` for every user.
    FullPower,
    /// Explicit amplitudes, clamped into `[0, sqrt(p_max)]`.
    Given(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct WmmseConfig {
    pub obj_tol: f64,
    pub max_iter: usize,
    pub init: Init,
}

impl Default for WmmseConfig {
    fn default() -> Self {
        Self { obj_tol: 1e-5, max_iter: 500, init: Init::FullPower }
    }
}

impl WmmseConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.obj_tol > 0.0) {
            return Err(Error::invalid("obj_tol must be positive"));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct WmmseOutput {
    pub allocation: PowerAllocation,
    pub iterations: usize,
    /// Objective after initialization followed by one value per iteration.
    pub trace: Vec<f64>,
    pub state: WmmseState,
}

/// Squared gains cached once per solve.
struct Solver<'a> {
    inst: &'a ProblemInstance,
    k_n: usize,
    h2: Vec<f64>,
    v_max: f64,
}

impl<'a> Solver<'a> {
    fn new(inst: &'a ProblemInstance) -> Self {
        let h2 = inst.effective_gains().into_iter().map(|h| h * h).collect();
        Self { inst, k_n: inst.num_users(), h2, v_max: inst.p_max().sqrt() }
    }

    #[inline]
    fn h2(&self, k: usize, j: usize) -> f64 {
        self.h2[k * self.k_n + j]
    }

    fn h(&self, k: usize) -> f64 {
        self.inst.gain(k, k)
    }

    fn update_u(&self, v: &[f64], u: &mut [f64]) {
        for k in 0..self.k_n {
            let mut denom = self.inst.noise()[k];
            for (j, vj) in v.iter().enumerate() {
                denom += self.h2(k, j) * vj * vj;
            }
            u[k] = self.h(k) * v[k] / denom;
        }
    }

    fn update_w(&self, v: &[f64], u: &[f64], w: &mut [f64]) {
        for k in 0..self.k_n {
            w[k] = 1.0 / (1.0 - u[k] * self.h(k) * v[k]).max(W_GUARD);
        }
    }

    fn update_v(&self, u: &[f64], w: &[f64], v: &mut [f64]) {
        let alpha = self.inst.weights();
        for k in 0..self.k_n {
            let num = alpha[k] * w[k] * u[k] * self.h(k);
            let mut den = 0.0;
            for j in 0..self.k_n {
                den += alpha[j] * w[j] * u[j] * u[j] * self.h2(j, k);
            }
            // den = 0 only when every u_j = 0; the unconstrained minimizer is
            // then +inf and projects onto the upper bound.
            v[k] = if den > 0.0 { (num / den).clamp(0.0, self.v_max) } else { self.v_max };
        }
    }

    fn objective(&self, v: &[f64], u: &[f64], w: &[f64]) -> f64 {
        let alpha = self.inst.weights();
        let noise = self.inst.noise();
        let mut obj = 0.0;
        for k in 0..self.k_n {
            let own = u[k] * self.h(k) * v[k] - 1.0;
            let mut e = own * own + noise[k] * u[k] * u[k];
            for j in (0..self.k_n).filter(|&j| j != k) {
                e += u[k] * u[k] * self.h2(k, j) * v[j] * v[j];
            }
            obj += alpha[k] * (w[k] * e - w[k].ln());
        }
        obj
    }

    fn initial_v(&self, init: &Init) -> Result<Vec<f64>> {
        match init {
            Init::FullPower => Ok(vec![self.v_max; self.k_n]),
            Init::Given(v0) => {
                check_dim(self.k_n, v0.len())?;
                if v0.iter().any(|v| !v.is_finite()) {
                    return Err(Error::invalid("initial amplitudes must be finite"));
                }
                Ok(v0.iter().map(|v| v.clamp(0.0, self.v_max)).collect())
            }
        }
    }
}

fn check_finite(iteration: usize, name: &str, xs: &[f64]) -> Result<()> {
    match xs.iter().position(|x| !x.is_finite()) {
        None => Ok(()),
        Some(k) => Err(Error::Numerical { iteration, what: format!("{name}[{k}] = {}", xs[k]) }),
    }
}

/// Runs WMMSE until the objective changes by less than `obj_tol` or
/// `max_iter` iterations have been executed.
pub fn wmmse(inst: &ProblemInstance, cfg: &WmmseConfig) -> Result<WmmseOutput> {
    cfg.validate()?;
    let solver = Solver::new(inst);
    let k_n = solver.k_n;
    let mut v = solver.initial_v(&cfg.init)?;
    let mut u = vec![0.0; k_n];
    let mut w = vec![0.0; k_n];
    solver.update_u(&v, &mut u);
    solver.update_w(&v, &u, &mut w);
    let mut obj = solver.objective(&v, &u, &w);
    check_finite(0, "objective", &[obj])?;
    let mut trace = Vec::with_capacity(cfg.max_iter.min(1024) + 1);
    trace.push(obj);

    let mut t = 0;
    while t < cfg.max_iter {
        t += 1;
        solver.update_v(&u, &w, &mut v);
        solver.update_u(&v, &mut u);
        solver.update_w(&v, &u, &mut w);
        check_finite(t, "v", &v)?;
        check_finite(t, "u", &u)?;
        check_finite(t, "w", &w)?;
        let next = solver.objective(&v, &u, &w);
        check_finite(t, "objective", &[next])?;
        trace.push(next);
        let delta = (next - obj).abs();
        obj = next;
        if delta < cfg.obj_tol {
            break;
        }
    }

    // sqrt(p_max)^2 can round above p_max
    let p_max = inst.p_max();
    let allocation = PowerAllocation::new(v.iter().map(|x| (x * x).min(p_max)).collect());
    Ok(WmmseOutput { allocation, iterations: t, trace, state: WmmseState { v, u, w, iteration: t, objective: obj } })
}

/// Amplitude iterates `v^0, ..., v^T` of exactly `iterations` WMMSE steps
/// with no stopping test.
pub fn wmmse_iterates(inst: &ProblemInstance, init: &Init, iterations: usize) -> Result<Vec<Vec<f64>>> {
    let solver = Solver::new(inst);
    let k_n = solver.k_n;
    let mut v = solver.initial_v(init)?;
    let mut u = vec![0.0; k_n];
    let mut w = vec![0.0; k_n];
    solver.update_u(&v, &mut u);
    solver.update_w(&v, &u, &mut w);
    let mut out = Vec::with_capacity(iterations + 1);
    out.push(v.clone());
    for t in 1..=iterations {
        solver.update_v(&u, &w, &mut v);
        solver.update_u(&v, &mut u);
        solver.update_w(&v, &u, &mut w);
        check_finite(t, "v", &v)?;
        out.push(v.clone());
    }
    Ok(out)
}

/// The projected v-block update evaluated at `(u, w)`.
pub fn v_update(inst: &ProblemInstance, u: &[f64], w: &[f64]) -> Result<Vec<f64>> {
    check_dim(inst.num_users(), u.len())?;
    check_dim(inst.num_users(), w.len())?;
    let solver = Solver::new(inst);
    let mut v = vec![0.0; solver.k_n];
    solver.update_v(u, w, &mut v);
    Ok(v)
}

/// Every transmitter at full power.
pub fn allocate_max_power(inst: &ProblemInstance) -> PowerAllocation {
    PowerAllocation::new(vec![inst.p_max(); inst.num_users()])
}

/// I.i.d. `Uniform(0, p_max)` powers.
pub fn allocate_random(inst: &ProblemInstance, seed: u64) -> PowerAllocation {
    let mut rng = rng::substream(seed, 0);
    let p_max = inst.p_max();
    PowerAllocation::new((0..inst.num_users()).map(|_| rng.random_range(0.0..=p_max)).collect())
}
