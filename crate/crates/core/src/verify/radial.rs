//! Sampled radial-unboundedness test and zero search for `V`.

use serde::{Deserialize, Serialize};

use super::optim::nelder_mead;
use crate::domain::Domain;
use crate::par::Exec;
use crate::synth::CompiledValue;

/// Number of shells, with radii `R0 * 2^j`.
pub const SHELLS: usize = 5;
/// A point counts as a zero of `V` below this value.
pub const ZERO_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialReport {
    pub radii: Vec<f64>,
    /// Minimum of `V` found on each shell.
    pub shell_minima: Vec<f64>,
    pub increasing: bool,
    /// Largest decrease between consecutive shells.
    pub worst_drop: f64,
    /// Smallest-norm non-origin zero of `V`, else the shell minimizer where
    /// the minima stopped increasing.
    pub witness: Option<Vec<f64>>,
}

fn sphere_directions(n: usize) -> Vec<Vec<f64>> {
    match n {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..720)
            .map(|k| {
                let t = k as f64 * std::f64::consts::TAU / 720.0;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        _ => {
            let m = 4000;
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..m)
                .map(|k| {
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / m as f64;
                    let rho = (1.0 - z * z).sqrt();
                    let t = golden * k as f64;
                    vec![rho * t.cos(), rho * t.sin(), z]
                })
                .collect()
        }
    }
}

fn on_sphere(y: &[f64], radius: f64) -> Vec<f64> {
    let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
    y.iter().map(|v| v * radius / norm).collect()
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Shell minima of `V` at radii `R0 * 2^j` with `R0` the domain radius.
pub fn radial_unboundedness(v: &CompiledValue, domain: &Domain, exec: Exec) -> RadialReport {
    let n = domain.dim();
    let r0 = domain.radius().max(1e-3);
    let radii: Vec<f64> = (0..SHELLS).map(|j| r0 * 2f64.powi(j as i32)).collect();
    let dirs = sphere_directions(n);
    let eval = |x: &[f64]| v.eval(x).unwrap_or(f64::INFINITY);
    let shells = exec.map(&radii, |&radius| {
        let mut vals: Vec<(f64, usize)> = dirs
            .iter()
            .enumerate()
            .map(|(i, d)| (eval(&on_sphere(d, radius)), i))
            .collect();
        vals.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut best = (f64::INFINITY, vec![0.0; n]);
        for &(_, i) in vals.iter().take(5) {
            let (y, fy) = nelder_mead(
                |y| eval(&on_sphere(y, radius)),
                &dirs[i],
                0.05,
                1e-14,
                400 * n,
            );
            if fy < best.0 {
                best = (fy, on_sphere(&y, radius));
            }
        }
        best
    });
    let shell_minima: Vec<f64> = shells.iter().map(|s| s.0).collect();
    let mut worst_drop: f64 = 0.0;
    let mut first_bad = None;
    for j in 1..SHELLS {
        let drop = shell_minima[j - 1] - shell_minima[j];
        if shell_minima[j] <= shell_minima[j - 1] + 1e-12 {
            worst_drop = worst_drop.max(drop.max(0.0));
            first_bad.get_or_insert(j);
        }
    }
    let increasing = first_bad.is_none();
    let witness = if increasing {
        None
    } else {
        let zeros = exec.map(&shells, |(_, x)| {
            let (z, fz) = nelder_mead(eval, x, 0.1 * r0, 1e-20, 2000 * n);
            (fz <= ZERO_TOL && norm(&z) >= 0.5 * r0).then_some(z)
        });
        zeros
            .into_iter()
            .flatten()
            .min_by(|a, b| norm(a).total_cmp(&norm(b)))
            .or_else(|| first_bad.map(|j| shells[j].1.clone()))
    };
    RadialReport {
        radii,
        shell_minima,
        increasing,
        worst_drop,
        witness,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::synth::ValueFunction;

    fn report(s: &str) -> RadialReport {
        let v = ValueFunction::closed(parse(s).unwrap()).compile();
        radial_unboundedness(&v, &Domain::cube(2, 2.0), Exec::Parallel)
    }

    #[test]
    fn quadratic_is_unbounded() {
        let r = report("(x1 + x2)^2 + x2^2");
        assert!(r.increasing, "{:?}", r.shell_minima);
        assert!(r.witness.is_none());
    }

    #[test]
    fn periodic_valley_is_found() {
        let r = report("(x1 + x2)^2 + 2 - 2*cos(x2)");
        assert!(!r.increasing);
        let w = r.witness.unwrap();
        let tau = std::f64::consts::TAU;
        assert!((w[0].abs() - tau).abs() < 1e-3 && (w[0] + w[1]).abs() < 1e-3, "{w:?}");
    }
}
