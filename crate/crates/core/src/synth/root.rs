//! The stabilizing root of `Q - r u^2 - 2 r b^-1 u f = 0`.

use super::SynthError;
use crate::expr::{Expr, Var};

/// Solves `qpos - r u^2 - (2r/b) u fdrift = 0` for the branch with
/// `(fdrift + b u) x_var <= 0`:
///
/// `u = -fdrift/b - sign(b x_var) sqrt(fdrift^2/b^2 + qpos/r)`.
///
/// When the radicand carries a factor `x_var^2` the `sign` is folded into
/// the square root and the result is `sign`-free. `qpos` must be a function
/// of `var` that vanishes at 0 and is non-negative on `interval`.
pub fn stabilizing_root(
    fdrift: &Expr,
    qpos: &Expr,
    b: f64,
    r: f64,
    var: Var,
    interval: (f64, f64),
) -> Result<Expr, SynthError> {
    if b == 0.0 || r <= 0.0 {
        return Err(SynthError::Precondition("need b != 0 and r > 0".into()));
    }
    let mut x = [0.0; 3];
    let q = qpos.compile();
    if q.eval(&x).abs() > 1e-12 {
        return Err(SynthError::Precondition(format!("{qpos} does not vanish at 0")));
    }
    let (lo, hi) = interval;
    let n = 10_000;
    for k in 0..=n {
        x[var.index()] = lo + (hi - lo) * k as f64 / n as f64;
        let v = q.eval(&x);
        if v.is_nan() || v < -1e-12 {
            return Err(SynthError::Precondition(format!(
                "{qpos} is negative at {var} = {}",
                x[var.index()]
            )));
        }
    }
    let shift = fdrift.scale(-1.0 / b);
    let radicand = Expr::add(vec![fdrift.powi(2).scale(1.0 / (b * b)), qpos.scale(1.0 / r)]);
    if radicand.is_zero() {
        return Ok(shift);
    }
    let xv = Expr::var(var);
    let branch = match radicand.divide_by_square(var) {
        Some(p) => Expr::product(&xv, &p.sqrt()).scale(b.signum()),
        None => Expr::product(&xv.sign(), &radicand.sqrt()).scale(b.signum()),
    };
    Ok(Expr::sub(&shift, &branch))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn p(s: &str) -> Expr {
        parse(s).unwrap()
    }

    const I: (f64, f64) = (-2.0, 2.0);

    #[test]
    fn reference_roots() {
        let u = stabilizing_root(&p("x2*sqrt(3*(1 + x2^2))"), &p("x2^2 + x2^4"), 1.0, 1.0, Var::X2, I)
            .unwrap();
        assert!(u.approx_eq(&p("-(2 + sqrt(3))*x2*sqrt(1 + x2^2)"), 1e-12), "{u}");
        let u = stabilizing_root(&Expr::zero(), &p("3*x1^2"), 1.0, 1.0, Var::X1, I).unwrap();
        assert!(u.approx_eq(&p("-sqrt(3)*x1"), 1e-12), "{u}");
        let u = stabilizing_root(&p("-x1^3"), &Expr::zero(), 1.0, 1.0, Var::X1, I).unwrap();
        assert!(u.is_zero(), "{u}");
    }

    #[test]
    fn root_solves_the_quadratic() {
        let (f, q) = (p("sin(x1) + x1"), p("x1^2*cos(x1)^2 + x1^4"));
        for b in [2.0, -0.5] {
            let u = stabilizing_root(&f, &q, b, 0.3, Var::X1, I).unwrap();
            for t in [-1.5, -0.2, 0.4, 1.9] {
                let x = [t];
                let (uv, fv, qv) = (u.eval(&x).unwrap(), f.eval(&x).unwrap(), q.eval(&x).unwrap());
                let res = qv - 0.3 * uv * uv - 2.0 * 0.3 / b * uv * fv;
                assert!(res.abs() < 1e-12, "b={b} x={t} residual {res}");
                assert!((fv + b * uv) * t <= 0.0);
            }
        }
    }

    #[test]
    fn sign_survives_without_square_factor() {
        let u = stabilizing_root(&Expr::zero(), &p("abs(x1)^3"), 1.0, 1.0, Var::X1, I).unwrap();
        assert!(u.has_sign(), "{u}");
    }

    #[test]
    fn negative_weight_is_rejected() {
        assert!(stabilizing_root(&Expr::zero(), &p("-x1^2"), 1.0, 1.0, Var::X1, I).is_err());
    }
}
