//! Fixed-step RK4 closed-loop simulation with running-cost accumulation.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{Compiled, Expr, ExprError, Var};
use crate::model::System;
use crate::par::Exec;
use crate::synth::{CompiledValue, SynthesisResult};

/// Norm above which a trajectory counts as divergent.
pub const DIVERGENCE_NORM: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("trajectory diverged at t = {t} (state {state:?})")]
    Diverged { t: f64, state: Vec<f64> },
    #[error("initial state has {got} coordinates, the system has {want}")]
    Dimension { got: usize, want: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub t_max: f64,
    /// Stop once `|x|` falls below this.
    pub convergence_radius: f64,
    /// Stop once `|x'|` falls below this (convergence to a non-origin rest point).
    pub tail_tolerance: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 1e-3,
            t_max: 50.0,
            convergence_radius: 1e-6,
            tail_tolerance: 1e-6,
        }
    }
}

impl SimConfig {
    fn validate(&self) -> Result<(), SimError> {
        let ok = [self.dt, self.t_max, self.convergence_radius, self.tail_tolerance]
            .iter()
            .all(|v| v.is_finite() && *v > 0.0);
        if ok {
            Ok(())
        } else {
            Err(SimError::Config("dt, t_max and tolerances must be positive".into()))
        }
    }
}

/// `x' = drift(x) + b u(x) e_n` with running cost `L_state(x) + r u^2`.
#[derive(Debug, Clone)]
pub struct ClosedLoop {
    drift: Vec<Compiled>,
    b: f64,
    r: f64,
    u: Compiled,
    l_state: Compiled,
}

impl ClosedLoop {
    pub fn new(sys: &System, u: &Expr, l_state: &Expr) -> ClosedLoop {
        ClosedLoop {
            drift: sys.drift().iter().map(Expr::compile).collect(),
            b: sys.b(),
            r: sys.r(),
            u: u.compile(),
            l_state: l_state.compile(),
        }
    }

    pub fn from_result(sys: &System, result: &SynthesisResult) -> ClosedLoop {
        ClosedLoop::new(sys, &result.u, &result.l_state)
    }

    /// Same loop with `u + eps * p` applied; the cost is charged on the
    /// perturbed input.
    pub fn perturbed(sys: &System, result: &SynthesisResult, eps: f64, p: &Expr) -> ClosedLoop {
        let u = Expr::sum(&result.u, &p.scale(eps));
        ClosedLoop::new(sys, &u, &result.l_state)
    }

    pub fn order(&self) -> usize {
        self.drift.len()
    }

    pub fn input(&self, x: &[f64]) -> f64 {
        self.u.eval(x)
    }

    pub fn running_cost(&self, x: &[f64]) -> f64 {
        let u = self.u.eval(x);
        self.l_state.eval(x) + self.r * u * u
    }

    /// Writes `x'` into `dx` and returns the running cost at `x`.
    pub fn rhs(&self, x: &[f64], dx: &mut [f64]) -> f64 {
        let u = self.u.eval(x);
        for (d, f) in dx.iter_mut().zip(&self.drift) {
            *d = f.eval(x);
        }
        let n = dx.len();
        dx[n - 1] += self.b * u;
        self.l_state.eval(x) + self.r * u * u
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub inputs: Vec<f64>,
    /// Accumulated `∫ L dt` at each sample.
    pub cumulative_cost: Vec<f64>,
    pub cost_integral: f64,
    pub converged_to: Option<Vec<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn terminal(&self) -> &[f64] {
        self.states.last().expect("trajectory has at least one sample")
    }

    /// Writes `t,x1,..,xn,u,L,cumcost`, one row per `stride` samples plus
    /// the final sample.
    pub fn write_csv<W: Write>(&self, cl: &ClosedLoop, stride: usize, mut w: W) -> io::Result<()> {
        let n = self.states.first().map_or(0, Vec::len);
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("x{i}")));
        header.extend(["u", "L", "cumcost"].map(String::from));
        writeln!(w, "{}", header.join(","))?;
        let stride = stride.max(1);
        let last = self.len().saturating_sub(1);
        for i in (0..self.len()).filter(|&i| i % stride == 0 || i == last) {
            let x = &self.states[i];
            let mut row = vec![self.times[i].to_string()];
            row.extend(x.iter().map(f64::to_string));
            row.push(self.inputs[i].to_string());
            row.push(cl.running_cost(x).to_string());
            row.push(self.cumulative_cost[i].to_string());
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Integrates the closed loop from `x0` with classic RK4, carrying the cost
/// integral as an extra state.
pub fn integrate(cl: &ClosedLoop, x0: &[f64], cfg: &SimConfig) -> Result<Trajectory, SimError> {
    cfg.validate()?;
    let n = cl.order();
    if x0.len() != n {
        return Err(SimError::Dimension { got: x0.len(), want: n });
    }
    let steps = (cfg.t_max / cfg.dt).round() as usize;
    let h = cfg.dt;
    let mut x = x0.to_vec();
    let mut cost = 0.0;
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![x.clone()],
        inputs: vec![cl.input(&x)],
        cumulative_cost: vec![0.0],
        cost_integral: 0.0,
        converged_to: None,
    };
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut tmp = vec![0.0; n];
    for step in 0..steps {
        let c1 = cl.rhs(&x, &mut k1);
        if norm(&x) <= cfg.convergence_radius || norm(&k1) <= cfg.tail_tolerance {
            traj.converged_to = Some(x.clone());
            break;
        }
        for i in 0..n {
            tmp[i] = x[i] + 0.5 * h * k1[i];
        }
        let c2 = cl.rhs(&tmp, &mut k2);
        for i in 0..n {
            tmp[i] = x[i] + 0.5 * h * k2[i];
        }
        let c3 = cl.rhs(&tmp, &mut k3);
        for i in 0..n {
            tmp[i] = x[i] + h * k3[i];
        }
        let c4 = cl.rhs(&tmp, &mut k4);
        for i in 0..n {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        cost += h / 6.0 * (c1 + 2.0 * c2 + 2.0 * c3 + c4);
        let t = (step + 1) as f64 * h;
        let size = norm(&x);
        if !size.is_finite() || size > DIVERGENCE_NORM || !cost.is_finite() {
            return Err(SimError::Diverged { t, state: x });
        }
        traj.times.push(t);
        traj.inputs.push(cl.input(&x));
        traj.states.push(x.clone());
        traj.cumulative_cost.push(cost);
    }
    if traj.converged_to.is_none() && norm(&x) <= cfg.convergence_radius {
        traj.converged_to = Some(x.clone());
    }
    traj.cost_integral = cost;
    Ok(traj)
}

/// `∫L dt` against the value decrease `V(x0) - V(x_T)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostConsistency {
    pub j: f64,
    pub v0: f64,
    pub gap: f64,
    pub converged: bool,
}

pub fn cost_consistency(
    sys: &System,
    result: &SynthesisResult,
    x0: &[f64],
    cfg: &SimConfig,
) -> Result<CostConsistency, SimError> {
    let cl = ClosedLoop::from_result(sys, result);
    let traj = integrate(&cl, x0, cfg)?;
    let v = result.value.compile();
    let v0 = v.eval(x0)? - v.eval(traj.terminal())?;
    Ok(CostConsistency {
        j: traj.cost_integral,
        v0,
        gap: (traj.cost_integral - v0).abs(),
        converged: traj.converged_to.is_some(),
    })
}

/// One perturbed policy `u + eps p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationTrial {
    pub eps: f64,
    pub p: Expr,
    /// Terminal-corrected cost `∫L dt + V(x_T)`; infinite on divergence.
    pub cost: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationReport {
    pub nominal_cost: f64,
    pub worst_gap: f64,
    pub trials: Vec<PerturbationTrial>,
}

/// Random polynomial of degree at most two without constant term, with
/// coefficients uniform in `[-1, 1]`.
pub fn random_perturbation(n: usize, rng: &mut impl Rng) -> Expr {
    let mut terms = Vec::new();
    for i in 0..n {
        let xi = Expr::var(Var::from_index(i));
        terms.push(xi.scale(rng.gen_range(-1.0..=1.0)));
        for j in i..n {
            let xj = Expr::var(Var::from_index(j));
            terms.push(Expr::product(&xi, &xj).scale(rng.gen_range(-1.0..=1.0)));
        }
    }
    Expr::add(terms)
}

/// Perturbation magnitudes cycled through by [`perturbation_optimality`].
pub const PERTURBATION_EPS: [f64; 4] = [0.01, -0.01, 0.1, -0.1];

/// Compares `∫L dt + V(x_T)` of `n_trials` perturbed policies with the
/// synthesized one; `worst_gap` is the smallest difference and should not
/// be meaningfully negative.
pub fn perturbation_optimality(
    sys: &System,
    result: &SynthesisResult,
    x0: &[f64],
    n_trials: usize,
    cfg: &SimConfig,
    seed: u64,
) -> Result<PerturbationReport, SimError> {
    let v = result.value.compile();
    let total = |cl: &ClosedLoop, v: &CompiledValue| -> Result<f64, SimError> {
        match integrate(cl, x0, cfg) {
            Ok(tr) => Ok(tr.cost_integral + v.eval(tr.terminal())?),
            Err(SimError::Diverged { .. }) => Ok(f64::INFINITY),
            Err(e) => Err(e),
        }
    };
    let nominal = total(&ClosedLoop::from_result(sys, result), &v)?;
    if !nominal.is_finite() {
        return Err(SimError::Diverged {
            t: cfg.t_max,
            state: x0.to_vec(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let plans: Vec<(f64, Expr)> = (0..n_trials)
        .map(|i| (PERTURBATION_EPS[i % 4], random_perturbation(sys.order(), &mut rng)))
        .collect();
    let costs = Exec::Parallel.map(&plans, |(eps, p)| {
        total(&ClosedLoop::perturbed(sys, result, *eps, p), &v)
    });
    let mut trials = Vec::with_capacity(n_trials);
    for ((eps, p), cost) in plans.into_iter().zip(costs) {
        let cost = cost?;
        trials.push(PerturbationTrial {
            eps,
            p,
            cost,
            gap: cost - nominal,
        });
    }
    let worst_gap = trials.iter().map(|t| t.gap).fold(f64::INFINITY, f64::min);
    Ok(PerturbationReport {
        nominal_cost: nominal,
        worst_gap,
        trials,
    })
}

/// Deviation statistics of `dV/dt = -L` along a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovStats {
    /// Largest `|dV/dt + L| / (1 + |L|)` over the sampled steps.
    pub max_rate_error: f64,
    pub worst_time: f64,
    /// Largest increase of `V` between consecutive sampled steps.
    pub max_increase: f64,
    /// `L(x_T, u(x_T))` when the trajectory converged.
    pub terminal_cost: Option<f64>,
}

/// Checks `dV/dt = -L` with a five-point stencil at every `every`-th step,
/// and that `V` does not increase between the sampled steps.
pub fn lyapunov_along(
    traj: &Trajectory,
    cl: &ClosedLoop,
    v: &CompiledValue,
    dt: f64,
    every: usize,
) -> Result<LyapunovStats, ExprError> {
    let every = every.max(1);
    let n = traj.len();
    let mut max_rate_error: f64 = 0.0;
    let mut worst_time = 0.0;
    let mut max_increase: f64 = 0.0;
    let mut prev = v.eval(&traj.states[0])?;
    let mut i = 2;
    while i + 2 < n {
        let s = |k: usize| v.eval(&traj.states[k]);
        let (vm2, vm1, v0, vp1, vp2) = (s(i - 2)?, s(i - 1)?, s(i)?, s(i + 1)?, s(i + 2)?);
        let dv = (-vp2 + 8.0 * vp1 - 8.0 * vm1 + vm2) / (12.0 * dt);
        let l = cl.running_cost(&traj.states[i]);
        let err = (dv + l).abs() / (1.0 + l.abs());
        if err > max_rate_error {
            max_rate_error = err;
            worst_time = traj.times[i];
        }
        max_increase = max_increase.max(v0 - prev);
        prev = v0;
        i += every;
    }
    let last = v.eval(traj.terminal())?;
    max_increase = max_increase.max(last - prev);
    Ok(LyapunovStats {
        max_rate_error,
        worst_time,
        max_increase,
        terminal_cost: traj.converged_to.as_ref().map(|x| cl.running_cost(x)),
    })
}
