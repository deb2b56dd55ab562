//! Batch verification of a synthesis result.

mod hessian;
mod optim;
mod radial;
mod report;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::Domain;
use crate::model::System;
use crate::par::Exec;
use crate::sim::{integrate, lyapunov_along, ClosedLoop, SimConfig, SimError};
use crate::synth::{ConditionKind, HjbEvaluator, Status, SynthesisResult, NONNEG_TOL, STRICT_MARGIN};

pub use hessian::{hessian_pd_region, HessianMethod, PdRegion};
pub use optim::nelder_mead;
pub use radial::{radial_unboundedness, RadialReport};

/// Relative tolerance of the HJB and stationarity identities.
pub const HJB_TOL: f64 = 1e-8;
/// Relative tolerance of the gradient cross-check.
pub const GRADIENT_TOL: f64 = 1e-6;
/// Relative tolerance of `dV/dt = -L` along trajectories.
pub const LYAPUNOV_TOL: f64 = 1e-6;
/// Bound on `L` at a declared convergence point.
pub const TERMINAL_COST_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    /// A failure means the result is wrong.
    Mandatory,
    /// A failure removes a stability or positivity conclusion.
    Claim,
    Informational,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub id: String,
    pub description: String,
    pub anchor: String,
    pub severity: Severity,
    pub status: CheckStatus,
    pub worst_violation: f64,
    pub witness: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Overall {
    Pass,
    Partial,
    Fail,
}

impl Overall {
    /// Exit status used by the command-line front end.
    pub fn exit_code(self) -> i32 {
        match self {
            Overall::Pass => 0,
            Overall::Fail => 1,
            Overall::Partial => 2,
        }
    }
}

impl std::fmt::Display for Overall {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Overall::Pass => "pass",
            Overall::Partial => "partial",
            Overall::Fail => "fail",
        })
    }
}

impl std::str::FromStr for Overall {
    type Err = String;

    fn from_str(s: &str) -> Result<Overall, String> {
        match s {
            "pass" => Ok(Overall::Pass),
            "partial" => Ok(Overall::Partial),
            "fail" => Ok(Overall::Fail),
            other => Err(format!("unknown verdict `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub x0: Vec<f64>,
    pub steps: usize,
    pub cost_integral: f64,
    pub converged_to: Option<Vec<f64>>,
    pub max_rate_error: f64,
    pub max_increase: f64,
    pub terminal_cost: Option<f64>,
    pub diverged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub case: String,
    pub domain: Domain,
    pub resolution: usize,
    pub seed: u64,
    pub checks: Vec<Check>,
    pub trajectories: Vec<TrajectorySummary>,
    pub pd_region: Option<Domain>,
    pub overall: Overall,
}

impl VerificationReport {
    pub fn check(&self, id: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.id == id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub seed: u64,
    pub exec: Exec,
    pub sim: SimConfig,
    /// Trajectories started at seeded random points, on top of the boundary ones.
    pub random_starts: usize,
    /// Stencil stride for the along-trajectory check.
    pub lyapunov_every: usize,
    pub convexity_pairs: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            seed: 0,
            exec: Exec::Parallel,
            sim: SimConfig::default(),
            random_starts: 8,
            lyapunov_every: 10,
            convexity_pairs: 1000,
        }
    }
}

/// Default per-axis grid resolution for an order.
pub fn default_resolution(order: usize) -> usize {
    if order >= 3 {
        21
    } else {
        41
    }
}

struct Builder {
    checks: Vec<Check>,
}

impl Builder {
    #[allow(clippy::too_many_arguments)]
    fn push(
        &mut self,
        id: &str,
        description: &str,
        anchor: &str,
        severity: Severity,
        status: CheckStatus,
        worst: f64,
        witness: Option<Vec<f64>>,
    ) {
        self.checks.push(Check {
            id: id.to_string(),
            description: description.to_string(),
            anchor: anchor.to_string(),
            severity,
            status,
            worst_violation: worst,
            witness: if status == CheckStatus::Fail { witness } else { None },
        });
    }
}

/// Largest `score` over the grid together with its location; `NaN` and
/// evaluation failures count as infinite.
fn grid_max<F>(pts: &[Vec<f64>], exec: Exec, score: F) -> (f64, Option<Vec<f64>>)
where
    F: Fn(&[f64]) -> Option<f64> + Sync + Send,
{
    let scores = exec.map(pts, |p| score(p));
    let mut best = (f64::NEG_INFINITY, None);
    for (p, s) in pts.iter().zip(scores) {
        let Some(s) = s else { continue };
        let s = if s.is_nan() { f64::INFINITY } else { s };
        if s > best.0 {
            best = (s, Some(p.clone()));
        }
    }
    if best.1.is_none() {
        best.0 = 0.0;
    }
    best
}

fn status(ok: bool) -> CheckStatus {
    if ok {
        CheckStatus::Pass
    } else {
        CheckStatus::Fail
    }
}

/// Starting points: box corners (plus edge midpoints in the plane) and
/// `random` seeded uniform points.
pub fn initial_conditions(domain: &Domain, random: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut pts = domain.corners();
    if domain.dim() == 2 {
        let [(a, b), (c, d)] = [domain.bounds()[0], domain.bounds()[1]];
        let (mx, my) = (0.5 * (a + b), 0.5 * (c + d));
        pts.extend([vec![mx, c], vec![mx, d], vec![a, my], vec![b, my]]);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..random {
        pts.push(
            domain
                .bounds()
                .iter()
                .map(|&(lo, hi)| if lo < hi { rng.gen_range(lo..=hi) } else { lo })
                .collect(),
        );
    }
    pts
}

pub fn verify_all(
    sys: &System,
    result: &SynthesisResult,
    domain: &Domain,
    resolution: usize,
    opts: &VerifyOptions,
) -> VerificationReport {
    let exec = opts.exec;
    let n = sys.order();
    let hjb = HjbEvaluator::new(sys, result);
    let value = hjb.value().clone();
    let (b, r) = (sys.b(), sys.r());
    let pts = domain.grid(resolution);
    let local = result.local_domain(domain);
    let mut out = Builder { checks: Vec::new() };
    let origin = vec![0.0; n];
    let is_origin = |x: &[f64]| x.iter().all(|&t| t == 0.0);
    let full_cost = |x: &[f64]| -> Option<f64> {
        let u = hjb.control(x).ok()?;
        Some(hjb.state_cost(x).ok()? + r * u * u)
    };

    let (worst, at) = grid_max(&pts, exec, |x| {
        let l = full_cost(x).unwrap_or(f64::NAN);
        Some(hjb.residual(x).map_or(f64::INFINITY, |h| h.abs() / (1.0 + l.abs())))
    });
    out.push(
        "hjb_residual",
        "|H(x, u(x), grad V(x))| <= 1e-8 (1 + |L|) on the grid",
        "HJB equation",
        Severity::Mandatory,
        status(worst <= HJB_TOL),
        worst,
        at,
    );

    let (worst, at) = grid_max(&pts, exec, |x| Some(-full_cost(x).unwrap_or(f64::NAN)));
    out.push(
        "running_cost_nonnegative",
        "L(x, u(x)) >= -1e-10 on the grid",
        "running cost",
        Severity::Mandatory,
        status(worst <= NONNEG_TOL),
        worst,
        at,
    );

    let v0 = value.eval(&origin).map_or(f64::INFINITY, f64::abs);
    out.push(
        "value_origin",
        "|V(0)| <= 1e-12",
        "boundary condition V(0) = 0",
        Severity::Mandatory,
        status(v0 <= STRICT_MARGIN),
        v0,
        Some(origin.clone()),
    );

    let values = exec.map(&pts, |x| value.eval(x).unwrap_or(f64::NAN));
    let lowest = |skip_origin: bool| {
        let mut best = (f64::INFINITY, None);
        for (p, &v) in pts.iter().zip(&values) {
            if skip_origin && is_origin(p) {
                continue;
            }
            let v = if v.is_nan() { f64::NEG_INFINITY } else { v };
            if v < best.0 {
                best = (v, Some(p.clone()));
            }
        }
        best
    };
    let (vmin, at) = lowest(false);
    out.push(
        "value_nonnegative",
        "V(x) >= -1e-10 on the grid",
        "value function as a minimal cost",
        Severity::Mandatory,
        status(vmin >= -NONNEG_TOL),
        (-vmin).max(0.0),
        at,
    );
    let (vmin, at) = lowest(true);
    out.push(
        "value_positive_definite",
        "V(x) > 0 for x != 0 on the grid",
        "Lyapunov positivity",
        Severity::Claim,
        status(vmin > STRICT_MARGIN),
        (STRICT_MARGIN - vmin).max(0.0),
        at,
    );

    let (worst, at) = grid_max(&pts, exec, |x| {
        let u = hjb.control(x).ok()?;
        Some(hjb.stationarity(x).map_or(f64::INFINITY, |s| s.abs() / (1.0 + (2.0 * r * u / b).abs())))
    });
    out.push(
        "stationarity",
        "V_xn + 2 r u / b = 0 on the grid",
        "minimizing the Hamiltonian in u",
        Severity::Mandatory,
        status(worst <= HJB_TOL),
        worst,
        at,
    );

    let h = 1e-3;
    let (worst, at) = grid_max(&pts, exec, |x| {
        let g = value.gradient(x).ok()?;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            let at = |s: f64| {
                let mut y = x.to_vec();
                y[i] += s * h;
                value.eval(&y).unwrap_or(f64::NAN)
            };
            let fd = (-at(2.0) + 8.0 * at(1.0) - 8.0 * at(-1.0) + at(-2.0)) / (12.0 * h);
            worst = worst.max((fd - g[i]).abs() / (1.0 + g[i].abs()));
        }
        Some(worst)
    });
    out.push(
        "gradient_consistency",
        "finite-difference gradient of V matches the exact gradient to 1e-6",
        "value function gradient",
        Severity::Mandatory,
        status(worst <= GRADIENT_TOL),
        worst,
        at,
    );

    let trajectories = trajectory_checks(sys, result, domain, opts, &mut out);

    for c in &result.conditions {
        let e = c.evaluate(domain, &local, exec);
        let severity = match c.kind {
            ConditionKind::Hypothesis => Severity::Mandatory,
            ConditionKind::Claim => Severity::Claim,
            ConditionKind::Informational => Severity::Informational,
        };
        let st = match e.status {
            Status::VerifiedSymbolic | Status::VerifiedSampled => CheckStatus::Pass,
            Status::Failed => CheckStatus::Fail,
            Status::Unknown => CheckStatus::Unknown,
        };
        out.push(
            &format!("condition:{}", c.id),
            &c.description,
            "structural side condition",
            severity,
            st,
            e.worst.map_or(0.0, |w| (-w).max(0.0)),
            e.witness,
        );
    }

    let radial = radial_unboundedness(&value, domain, exec);
    out.push(
        "radially_unbounded",
        "min of V over spheres of growing radius increases",
        "global Lyapunov function",
        Severity::Claim,
        status(radial.increasing),
        radial.worst_drop,
        radial.witness.clone(),
    );

    let (frac, at) = convexity_check(result, domain, opts);
    out.push(
        "running_cost_convexity",
        "midpoint convexity of the state cost on random pairs",
        "convex running cost and convergence to the origin",
        Severity::Informational,
        status(frac == 0.0),
        frac,
        at,
    );

    let pd = hessian_pd_region(&result.value, domain, resolution);
    out.push(
        "hessian_pd_region",
        "Hessian of V is positive definite on a box around the origin",
        "Hessian test for local positive definiteness",
        Severity::Informational,
        status(pd.region.is_some()),
        1.0 - pd.fraction_pd,
        None,
    );

    let checks = out.checks;
    let overall = if checks
        .iter()
        .any(|c| c.severity == Severity::Mandatory && c.status == CheckStatus::Fail)
    {
        Overall::Fail
    } else if checks
        .iter()
        .any(|c| c.severity == Severity::Claim && c.status == CheckStatus::Fail)
    {
        Overall::Partial
    } else {
        Overall::Pass
    };
    VerificationReport {
        case: result.case.to_string(),
        domain: domain.clone(),
        resolution,
        seed: opts.seed,
        checks,
        trajectories,
        pd_region: pd.region,
        overall,
    }
}

fn trajectory_checks(
    sys: &System,
    result: &SynthesisResult,
    domain: &Domain,
    opts: &VerifyOptions,
    out: &mut Builder,
) -> Vec<TrajectorySummary> {
    let starts = initial_conditions(domain, opts.random_starts, opts.seed);
    let cl = ClosedLoop::from_result(sys, result);
    let value = result.value.compile();
    let summaries = opts.exec.map(&starts, |x0| {
        let run = integrate(&cl, x0, &opts.sim);
        match run {
            Ok(tr) => {
                let stats = lyapunov_along(&tr, &cl, &value, opts.sim.dt, opts.lyapunov_every);
                let (rate, inc, term) = match stats {
                    Ok(s) => (s.max_rate_error, s.max_increase, s.terminal_cost),
                    Err(_) => (f64::INFINITY, f64::INFINITY, None),
                };
                TrajectorySummary {
                    x0: x0.clone(),
                    steps: tr.len() - 1,
                    cost_integral: tr.cost_integral,
                    converged_to: tr.converged_to.clone(),
                    max_rate_error: rate,
                    max_increase: inc,
                    terminal_cost: term,
                    diverged: false,
                }
            }
            Err(e) => TrajectorySummary {
                x0: x0.clone(),
                steps: 0,
                cost_integral: f64::INFINITY,
                converged_to: None,
                max_rate_error: f64::INFINITY,
                max_increase: f64::INFINITY,
                terminal_cost: None,
                diverged: matches!(e, SimError::Diverged { .. }),
            },
        }
    });
    let mut worst = 0.0f64;
    let mut witness = None;
    for s in &summaries {
        let v0 = value.eval(&s.x0).unwrap_or(0.0).abs();
        let score = [
            s.max_rate_error / LYAPUNOV_TOL,
            s.max_increase.max(0.0) / (1e-10 * (1.0 + v0)),
            s.terminal_cost.unwrap_or(0.0) / TERMINAL_COST_TOL,
        ]
        .into_iter()
        .fold(0.0, f64::max);
        let score = if score.is_nan() { f64::INFINITY } else { score };
        if score > worst {
            worst = score;
            witness = Some(s.x0.clone());
        }
    }
    out.push(
        "trajectory_lyapunov",
        "dV/dt = -L within 1e-6 (1 + |L|), V non-increasing and L(x_T) <= 1e-8 along simulated trajectories",
        "dV/dt = -L along optimal trajectories",
        Severity::Mandatory,
        status(worst <= 1.0),
        worst,
        witness,
    );
    let converged = summaries.iter().filter(|s| s.converged_to.is_some()).count();
    out.push(
        "trajectory_convergence",
        &format!("{converged} of {} trajectories reached a rest point within t_max", summaries.len()),
        "convergence to minimizers of L",
        Severity::Informational,
        if converged == summaries.len() {
            CheckStatus::Pass
        } else {
            CheckStatus::Unknown
        },
        (summaries.len() - converged) as f64,
        None,
    );
    summaries
}

/// Fraction of random pairs violating midpoint convexity of `L_state`.
fn convexity_check(
    result: &SynthesisResult,
    domain: &Domain,
    opts: &VerifyOptions,
) -> (f64, Option<Vec<f64>>) {
    let l = result.l_state.compile();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x5eed);
    let mut draw = || -> Vec<f64> {
        domain
            .bounds()
            .iter()
            .map(|&(lo, hi)| if lo < hi { rng.gen_range(lo..=hi) } else { lo })
            .collect()
    };
    let mut bad = 0usize;
    let mut witness = None;
    for _ in 0..opts.convexity_pairs {
        let (x, y) = (draw(), draw());
        let m: Vec<f64> = x.iter().zip(&y).map(|(a, b)| 0.5 * (a + b)).collect();
        let (lx, ly, lm) = (l.eval(&x), l.eval(&y), l.eval(&m));
        if lm > 0.5 * (lx + ly) + 1e-12 * (1.0 + lx.abs() + ly.abs()) {
            bad += 1;
            witness.get_or_insert(m);
        }
    }
    (bad as f64 / opts.convexity_pairs.max(1) as f64, witness)
}
