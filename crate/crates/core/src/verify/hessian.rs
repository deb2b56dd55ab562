//! Boxes around the origin on which the Hessian of `V` is positive definite.

use serde::{Deserialize, Serialize};

use crate::domain::Domain;
use crate::expr::{Compiled, Var};
use crate::par::Exec;
use crate::synth::{CompiledValue, ValueFunction};

/// Minor threshold for the finite-difference Hessian.
pub const FD_HESSIAN_TOL: f64 = 1e-4;
const FD_STEP: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HessianMethod {
    Symbolic,
    FiniteDifference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdRegion {
    /// Largest candidate box with positive minors at every grid point, or
    /// `None` when the Hessian is not positive definite at the origin.
    pub region: Option<Domain>,
    pub method: HessianMethod,
    /// Share of grid points with positive minors.
    pub fraction_pd: f64,
}

enum Hess {
    Symbolic(Vec<Vec<Compiled>>),
    Numeric(CompiledValue),
}

impl Hess {
    fn at(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let n = x.len();
        match self {
            Hess::Symbolic(h) => (0..n)
                .map(|i| (0..n).map(|j| h[i][j].eval(x)).collect())
                .collect(),
            Hess::Numeric(v) => {
                let mut h = vec![vec![0.0; n]; n];
                for j in 0..n {
                    let mut p = x.to_vec();
                    let mut m = x.to_vec();
                    p[j] += FD_STEP;
                    m[j] -= FD_STEP;
                    let (gp, gm) = match (v.gradient(&p), v.gradient(&m)) {
                        (Ok(a), Ok(b)) => (a, b),
                        _ => return vec![vec![f64::NAN; n]; n],
                    };
                    for (row, (a, b)) in h.iter_mut().zip(gp.iter().zip(&gm)) {
                        row[j] = (a - b) / (2.0 * FD_STEP);
                    }
                }
                #[allow(clippy::needless_range_loop)]
                for i in 0..n {
                    for j in 0..i {
                        let s = 0.5 * (h[i][j] + h[j][i]);
                        h[i][j] = s;
                        h[j][i] = s;
                    }
                }
                h
            }
        }
    }
}

/// Leading principal minors of a symmetric matrix of order at most 3.
fn minors(h: &[Vec<f64>]) -> Vec<f64> {
    let n = h.len();
    let mut out = vec![h[0][0]];
    if n >= 2 {
        out.push(h[0][0] * h[1][1] - h[0][1] * h[1][0]);
    }
    if n >= 3 {
        out.push(
            h[0][0] * (h[1][1] * h[2][2] - h[1][2] * h[2][1])
                - h[0][1] * (h[1][0] * h[2][2] - h[1][2] * h[2][0])
                + h[0][2] * (h[1][0] * h[2][1] - h[1][1] * h[2][0]),
        );
    }
    out
}

/// Samples the leading principal minors of the Hessian of `v` on the grid
/// and returns the largest-volume box among the uniformly scaled domains and
/// the domains restricted along a single axis.
pub fn hessian_pd_region(v: &ValueFunction, domain: &Domain, resolution: usize) -> PdRegion {
    let n = domain.dim();
    let resolution = resolution.max(3) | 1;
    let (hess, method, tol) = match v.as_expr() {
        Some(e) if !e.has_nonsmooth() => {
            let h = Var::all(n)
                .map(|vi| {
                    let di = e.diff(vi);
                    Var::all(n).map(|vj| di.diff(vj).compile()).collect()
                })
                .collect();
            (Hess::Symbolic(h), HessianMethod::Symbolic, 0.0)
        }
        _ => (Hess::Numeric(v.compile()), HessianMethod::FiniteDifference, FD_HESSIAN_TOL),
    };
    let axes: Vec<Vec<f64>> = (0..n).map(|i| domain.axis(i, resolution)).collect();
    let pts = domain.grid(resolution);
    let ok: Vec<bool> = Exec::Parallel.map(&pts, |x| {
        minors(&hess.at(x)).iter().all(|&m| m > tol)
    });
    let fraction_pd = ok.iter().filter(|&&b| b).count() as f64 / ok.len() as f64;
    let origin = vec![0.0; n];
    let centre_ok = minors(&hess.at(&origin)).iter().all(|&m| m > tol);
    if !centre_ok {
        return PdRegion {
            region: None,
            method,
            fraction_pd,
        };
    }
    let index = |k: &[usize]| k.iter().fold(0, |acc, &i| acc * resolution + i);
    // All grid points inside `scale[i] * domain` are positive definite.
    let box_ok = |scale: &[f64]| -> bool {
        let ranges: Vec<Vec<usize>> = (0..n)
            .map(|i| {
                let (lo, hi) = domain.bounds()[i];
                (0..resolution)
                    .filter(|&k| {
                        let t = axes[i][k];
                        t >= lo * scale[i] - 1e-12 && t <= hi * scale[i] + 1e-12
                    })
                    .collect()
            })
            .collect();
        let mut k = vec![0usize; n];
        loop {
            let idx: Vec<usize> = (0..n).map(|i| ranges[i][k[i]]).collect();
            if !ok[index(&idx)] {
                return false;
            }
            let mut i = n;
            loop {
                if i == 0 {
                    return true;
                }
                i -= 1;
                k[i] += 1;
                if k[i] < ranges[i].len() {
                    break;
                }
                k[i] = 0;
            }
        }
    };
    let steps = (resolution - 1) / 2;
    let levels: Vec<f64> = (1..=steps).rev().map(|j| j as f64 / steps as f64).collect();
    let largest = |make: &dyn Fn(f64) -> Vec<f64>| -> Option<Vec<f64>> {
        levels.iter().map(|&s| make(s)).find(|sc| box_ok(sc))
    };
    let mut candidates: Vec<Vec<f64>> = Vec::new();
    candidates.extend(largest(&|s| vec![s; n]));
    for a in 0..n {
        candidates.extend(largest(&|s| {
            let mut sc = vec![1.0; n];
            sc[a] = s;
            sc
        }));
    }
    let best = candidates
        .into_iter()
        .max_by(|a, b| a.iter().product::<f64>().total_cmp(&b.iter().product::<f64>()));
    let region = best.map(|sc| {
        Domain::new(
            domain
                .bounds()
                .iter()
                .zip(&sc)
                .map(|(&(lo, hi), s)| (lo * s, hi * s))
                .collect(),
        )
        .expect("scaled bounds stay ordered")
    });
    PdRegion {
        region,
        method,
        fraction_pd,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn region(s: &str) -> PdRegion {
        let v = ValueFunction::closed(parse(s).unwrap());
        hessian_pd_region(&v, &Domain::cube(2, 2.0), 41)
    }

    #[test]
    fn quadratic_forms() {
        let r = region("(x1 + x2)^2 + x2^2");
        assert_eq!(r.region, Some(Domain::cube(2, 2.0)));
        assert_eq!(r.method, HessianMethod::Symbolic);
        assert!(region("x1^2 - x2^2").region.is_none());
    }

    #[test]
    fn periodic_term_limits_the_box() {
        let r = region("x1^2 + 2 - 2*cos(x2)").region.unwrap();
        let (_, hi) = r.bounds()[1];
        assert!(hi < std::f64::consts::FRAC_PI_2 && hi > 1.4, "{r}");
        assert_eq!(r.bounds()[0], (-2.0, 2.0));
    }

    #[test]
    fn finite_difference_fallback() {
        let mut v = ValueFunction::closed(parse("x1^2").unwrap());
        v.add_integral(1.0, &parse("x2*sqrt(1 + x2^2)").unwrap(), crate::expr::Var::X2);
        let r = hessian_pd_region(&v, &Domain::cube(2, 2.0), 21);
        assert_eq!(r.method, HessianMethod::FiniteDifference);
        assert_eq!(r.region, Some(Domain::cube(2, 2.0)));
    }
}
