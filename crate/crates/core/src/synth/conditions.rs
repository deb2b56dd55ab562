//! Side conditions attached to a synthesis result and their sampled checks.

use serde::{Deserialize, Serialize};

use super::value::ValueFunction;
use crate::domain::Domain;
use crate::expr::{Expr, Var};
use crate::par::Exec;

/// Tolerance for `>= 0` style predicates.
pub const NONNEG_TOL: f64 = 1e-10;
/// Margin for strict inequalities.
pub const STRICT_MARGIN: f64 = 1e-12;
/// Approximate number of points used to sample a predicate.
pub const SAMPLE_POINTS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    VerifiedSymbolic,
    VerifiedSampled,
    Failed,
    Unknown,
}

impl Status {
    pub fn is_failed(self) -> bool {
        self == Status::Failed
    }
}

/// How a failed condition affects the verdict on a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionKind {
    /// Needed for optimality; a failure invalidates the result.
    Hypothesis,
    /// Needed only for a stability or positivity conclusion.
    Claim,
    /// Reported, never decisive.
    Informational,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Domain,
    /// The result's explicit local region, or the domain shrunk tenfold.
    Local,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predicate {
    NonNegative(Expr),
    NonPositive(Expr),
    /// `expr > 0` wherever `var != 0`.
    PositiveAway { expr: Expr, var: Var },
    /// `expr < 0` wherever `var != 0`.
    NegativeAway { expr: Expr, var: Var },
    NonZero(Expr),
    /// Zero at the origin and positive elsewhere.
    PositiveDefinite(ValueFunction),
    /// A function of `var` alone: zero where `var = 0` and positive elsewhere.
    PositiveDefiniteIn { value: ValueFunction, var: Var },
    /// Decided when the result was built.
    Holds(bool),
    Undecided,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub id: String,
    pub description: String,
    pub kind: ConditionKind,
    pub region: Region,
    pub predicate: Predicate,
    pub status: Status,
    pub worst: Option<f64>,
    pub witness: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub status: Status,
    pub worst: Option<f64>,
    pub witness: Option<Vec<f64>>,
}

impl Condition {
    pub fn new(
        id: &str,
        description: impl Into<String>,
        kind: ConditionKind,
        region: Region,
        predicate: Predicate,
    ) -> Condition {
        Condition {
            id: id.to_string(),
            description: description.into(),
            kind,
            region,
            predicate,
            status: Status::Unknown,
            worst: None,
            witness: None,
        }
    }

    pub fn evaluate(&self, domain: &Domain, local: &Domain, exec: Exec) -> Evaluation {
        let region = match self.region {
            Region::Domain => domain,
            Region::Local => local,
        };
        evaluate(&self.predicate, region, exec)
    }

    /// Evaluates and stores the outcome.
    pub fn check(mut self, domain: &Domain, local: &Domain, exec: Exec) -> Condition {
        let e = self.evaluate(domain, local, exec);
        self.status = e.status;
        self.worst = e.worst;
        self.witness = e.witness;
        self
    }
}

/// Odd per-axis resolution giving roughly [`SAMPLE_POINTS`] points.
pub fn sample_resolution(dim: usize) -> usize {
    let r = (SAMPLE_POINTS as f64).powf(1.0 / dim.max(1) as f64).ceil() as usize;
    r | 1
}

/// Evaluates `score` on the sample grid; a point fails when the score is
/// negative (or NaN). Returns the most negative score and where it occurred.
fn scan<F>(region: &Domain, exec: Exec, score: F) -> Evaluation
where
    F: Fn(&[f64]) -> Option<f64> + Sync + Send,
{
    let pts = region.grid(sample_resolution(region.dim()));
    let scores = exec.map(&pts, |p| score(p));
    let mut worst: Option<(f64, usize)> = None;
    for (i, s) in scores.iter().enumerate() {
        if let Some(s) = *s {
            let s = if s.is_nan() { f64::NEG_INFINITY } else { s };
            if worst.is_none_or(|(w, _)| s < w) {
                worst = Some((s, i));
            }
        }
    }
    match worst {
        Some((w, i)) if w < 0.0 => Evaluation {
            status: Status::Failed,
            worst: Some(w),
            witness: Some(pts[i].clone()),
        },
        Some((w, _)) => Evaluation {
            status: Status::VerifiedSampled,
            worst: Some(w),
            witness: None,
        },
        None => Evaluation {
            status: Status::VerifiedSampled,
            worst: None,
            witness: None,
        },
    }
}

pub fn evaluate(p: &Predicate, region: &Domain, exec: Exec) -> Evaluation {
    let decided = |ok: bool| Evaluation {
        status: if ok {
            Status::VerifiedSymbolic
        } else {
            Status::Failed
        },
        worst: None,
        witness: None,
    };
    match p {
        Predicate::Holds(ok) => decided(*ok),
        Predicate::Undecided => Evaluation {
            status: Status::Unknown,
            worst: None,
            witness: None,
        },
        Predicate::NonNegative(e) | Predicate::NonPositive(e) => {
            let sign = if matches!(p, Predicate::NonNegative(_)) {
                1.0
            } else {
                -1.0
            };
            let e = e.scale(sign);
            if let Some(c) = e.as_const() {
                return decided(c >= -NONNEG_TOL);
            }
            if e.is_manifestly_nonnegative() {
                return decided(true);
            }
            let c = e.compile();
            scan(region, exec, |x| Some(c.eval(x) + NONNEG_TOL))
        }
        Predicate::PositiveAway { expr, var } | Predicate::NegativeAway { expr, var } => {
            let sign = if matches!(p, Predicate::PositiveAway { .. }) {
                1.0
            } else {
                -1.0
            };
            let e = expr.scale(sign);
            if let Some(c) = e.as_const() {
                return decided(c > STRICT_MARGIN);
            }
            let c = e.compile();
            let i = var.index();
            scan(region, exec, |x| (x[i] != 0.0).then(|| c.eval(x) - STRICT_MARGIN))
        }
        Predicate::NonZero(e) => {
            if let Some(c) = e.as_const() {
                return decided(c != 0.0);
            }
            let c = e.compile();
            scan(region, exec, |x| Some(c.eval(x).abs() - STRICT_MARGIN))
        }
        Predicate::PositiveDefinite(v) => positive_definite(v, None, region, exec),
        Predicate::PositiveDefiniteIn { value, var } => {
            positive_definite(value, Some(*var), region, exec)
        }
    }
}

/// Positivity away from the origin, or away from `x_var = 0` when `var` is
/// given.
fn positive_definite(v: &ValueFunction, var: Option<Var>, region: &Domain, exec: Exec) -> Evaluation {
    let c = v.compile();
    let origin = vec![0.0; region.dim()];
    match c.eval(&origin) {
        Ok(v0) if v0.abs() <= STRICT_MARGIN => {}
        Ok(v0) => {
            return Evaluation {
                status: Status::Failed,
                worst: Some(-v0.abs()),
                witness: Some(origin),
            }
        }
        Err(_) => {
            return Evaluation {
                status: Status::Failed,
                worst: Some(f64::NEG_INFINITY),
                witness: Some(origin),
            }
        }
    }
    scan(region, exec, |x| {
        let at_zero = match var {
            Some(v) => x[v.index()] == 0.0,
            None => x.iter().all(|&t| t == 0.0),
        };
        if at_zero {
            return None;
        }
        Some(c.eval(x).map_or(f64::NEG_INFINITY, |v| v - STRICT_MARGIN))
    })
}
