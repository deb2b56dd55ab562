//! Adaptive Simpson quadrature.

use super::{Expr, ExprError, Var};

/// Default absolute tolerance.
pub const QUAD_TOL: f64 = 1e-10;
/// Default cap on the number of accepted subintervals.
pub const QUAD_MAX_SUBDIVISIONS: usize = 1_000_000;

/// Intervals are always split at least this many times, so integrands that
/// happen to vanish at the first five nodes are not mistaken for zero.
const MIN_DEPTH: u32 = 3;
const MAX_DEPTH: u32 = 60;

/// `∫_lo^hi e dv` with the other coordinates taken from `at`.
pub fn quad(e: &Expr, v: Var, lo: f64, hi: f64, at: &[f64]) -> Result<f64, ExprError> {
    quad_with_tol(e, v, lo, hi, at, QUAD_TOL, QUAD_MAX_SUBDIVISIONS)
}

pub fn quad_with_tol(
    e: &Expr,
    v: Var,
    lo: f64,
    hi: f64,
    at: &[f64],
    tol: f64,
    max_subdivisions: usize,
) -> Result<f64, ExprError> {
    let c = e.compile();
    let n = at.len().max(v.index() + 1).max(c.arity());
    let mut point = vec![0.0; n];
    point[..at.len()].copy_from_slice(at);
    let mut failed = None;
    let mut f = |t: f64| {
        point[v.index()] = t;
        let y = c.eval(&point);
        if !y.is_finite() && failed.is_none() {
            failed = Some(t);
        }
        y
    };
    let r = simpson(&mut f, lo, hi, tol, max_subdivisions);
    if let Some(t) = failed {
        return Err(ExprError::Domain(format!(
            "integrand `{e}` is not finite at {v} = {t}"
        )));
    }
    r.ok_or(ExprError::QuadratureFailed {
        tol,
        max: max_subdivisions,
    })
}

/// Adaptive Simpson on a closure; `None` when the subdivision budget runs out.
pub fn simpson<F: FnMut(f64) -> f64>(
    f: &mut F,
    lo: f64,
    hi: f64,
    tol: f64,
    max_subdivisions: usize,
) -> Option<f64> {
    if lo == hi {
        return Some(0.0);
    }
    let (a, b, sign) = if lo < hi { (lo, hi, 1.0) } else { (hi, lo, -1.0) };
    struct Seg {
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let mut stack = vec![Seg {
        a,
        b,
        fa,
        fm,
        fb,
        whole: (b - a) / 6.0 * (fa + 4.0 * fm + fb),
        tol,
        depth: 0,
    }];
    let mut total = 0.0;
    let mut accepted = 0usize;
    while let Some(s) = stack.pop() {
        let m = 0.5 * (s.a + s.b);
        let lm = 0.5 * (s.a + m);
        let rm = 0.5 * (m + s.b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - s.a) / 6.0 * (s.fa + 4.0 * flm + s.fm);
        let right = (s.b - m) / 6.0 * (s.fm + 4.0 * frm + s.fb);
        let delta = left + right - s.whole;
        let settled = s.depth >= MIN_DEPTH && delta.abs() <= 15.0 * s.tol;
        if settled || s.depth >= MAX_DEPTH || !delta.is_finite() {
            total += left + right + delta / 15.0;
            accepted += 1;
            if accepted > max_subdivisions || (!settled && s.depth >= MAX_DEPTH) {
                return None;
            }
            continue;
        }
        let half = 0.5 * s.tol;
        stack.push(Seg {
            a: m,
            b: s.b,
            fa: s.fm,
            fm: frm,
            fb: s.fb,
            whole: right,
            tol: half,
            depth: s.depth + 1,
        });
        stack.push(Seg {
            a: s.a,
            b: m,
            fa: s.fa,
            fm: flm,
            fb: s.fm,
            whole: left,
            tol: half,
            depth: s.depth + 1,
        });
    }
    Some(sign * total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use std::f64::consts::PI;

    #[test]
    fn reference_integrals() {
        let q = |s: &str, lo, hi| quad(&parse(s).unwrap(), Var::X2, lo, hi, &[]).unwrap();
        assert!((q("sin(x2)", 0.0, PI) - 2.0).abs() < 1e-10);
        assert!((q("x2^2", 0.0, 1.0) - 1.0 / 3.0).abs() < 1e-10);
        let exact = (2.0 * 2f64.sqrt() - 1.0) / 3.0;
        assert!((q("x2*sqrt(1 + x2^2)", 0.0, 1.0) - exact).abs() < 1e-10);
    }

    #[test]
    fn reversed_bounds_flip_sign() {
        let e = parse("x2^3").unwrap();
        let a = quad(&e, Var::X2, 0.0, -2.0, &[]).unwrap();
        assert!((a - 4.0).abs() < 1e-10);
    }

    #[test]
    fn other_coordinates_are_held_fixed() {
        let e = parse("x1*x2").unwrap();
        let a = quad(&e, Var::X2, 0.0, 1.0, &[3.0, 0.0]).unwrap();
        assert!((a - 1.5).abs() < 1e-12);
    }

    #[test]
    fn singular_integrand_is_reported() {
        let e = parse("1/x2").unwrap();
        assert!(quad(&e, Var::X2, 0.0, 1.0, &[]).is_err());
    }
}
