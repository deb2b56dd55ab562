use super::canon::split_coeff;
use super::{Exponent, Expr, ExprError, Var};

/// Result of a closed-form antiderivative attempt.
#[derive(Debug, Clone, PartialEq)]
pub enum Antiderivative {
    Closed(Expr),
    /// The integrand is outside the supported subclass; integrate numerically.
    NotClosedForm,
}

impl Antiderivative {
    pub fn closed(self) -> Option<Expr> {
        match self {
            Antiderivative::Closed(e) => Some(e),
            Antiderivative::NotClosedForm => None,
        }
    }
}

pub(super) fn diff(e: &Expr, v: Var) -> Expr {
    if !e.depends_on(v) {
        return Expr::zero();
    }
    match e {
        Expr::Const(_) => Expr::zero(),
        Expr::Var(w) => Expr::constant(if *w == v { 1.0 } else { 0.0 }),
        Expr::Add(ts) => Expr::add(ts.iter().map(|t| diff(t, v)).collect()),
        Expr::Mul(fs) => {
            let mut terms = Vec::with_capacity(fs.len());
            for (i, f) in fs.iter().enumerate() {
                if !f.depends_on(v) {
                    continue;
                }
                let mut factors: Vec<Expr> = fs
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, g)| g.clone())
                    .collect();
                factors.push(diff(f, v));
                terms.push(Expr::mul(factors));
            }
            Expr::add(terms)
        }
        Expr::Pow(b, k) => Expr::mul(vec![
            Expr::constant(k.value()),
            b.pow(*k + Exponent::int(-1)),
            diff(b, v),
        ]),
        Expr::Sin(a) => Expr::product(&a.cos(), &diff(a, v)),
        Expr::Cos(a) => Expr::product(&a.sin().neg(), &diff(a, v)),
        Expr::Sign(_) => Expr::zero(),
        Expr::Abs(a) => Expr::product(&a.sign(), &diff(a, v)),
    }
}

pub(super) fn diff_checked(e: &Expr, v: Var) -> Result<Expr, ExprError> {
    if let Some(node) = nonsmooth_on(e, v) {
        return Err(ExprError::NonDifferentiable { node, var: v });
    }
    Ok(diff(e, v))
}

fn nonsmooth_on(e: &Expr, v: Var) -> Option<String> {
    match e {
        Expr::Const(_) | Expr::Var(_) => None,
        Expr::Sign(a) | Expr::Abs(a) if a.depends_on(v) => Some(e.to_string()),
        Expr::Add(xs) | Expr::Mul(xs) => xs.iter().find_map(|x| nonsmooth_on(x, v)),
        Expr::Pow(b, _) => nonsmooth_on(b, v),
        Expr::Sin(a) | Expr::Cos(a) | Expr::Sign(a) | Expr::Abs(a) => nonsmooth_on(a, v),
    }
}

pub(super) fn antiderivative(e: &Expr, v: Var) -> Antiderivative {
    let terms: Vec<Expr> = match e {
        Expr::Add(ts) => ts.clone(),
        other => vec![other.clone()],
    };
    let mut out = Vec::with_capacity(terms.len());
    for t in &terms {
        match integrate_term(t, v) {
            Some(f) => out.push(f),
            None => return Antiderivative::NotClosedForm,
        }
    }
    Antiderivative::Closed(Expr::add(out))
}

enum Trig {
    Sin,
    Cos,
}

/// Integrates `c * rest * v^n * trig(alpha*v + beta)` where `rest` is free of `v`.
fn integrate_term(t: &Expr, v: Var) -> Option<Expr> {
    let (c, mono) = split_coeff(t);
    let x = Expr::var(v);
    let Some(mono) = mono else {
        return Some(Expr::product(&x, &Expr::constant(c)));
    };
    let factors = match mono {
        Expr::Mul(fs) => fs,
        other => vec![other],
    };
    let mut free = vec![Expr::constant(c)];
    let mut n: i32 = 0;
    let mut trig: Option<(Trig, Expr, f64)> = None;
    for f in factors {
        if !f.depends_on(v) {
            free.push(f);
            continue;
        }
        match &f {
            Expr::Var(_) => n += 1,
            Expr::Pow(b, k) if **b == x => match k.as_int() {
                Some(m) if m >= 0 => n += m,
                _ => return None,
            },
            Expr::Sin(a) | Expr::Cos(a) if trig.is_none() => {
                let aff = a.match_affine(v)?;
                let alpha = aff.coeff.as_const()?;
                let kind = if matches!(f, Expr::Sin(_)) { Trig::Sin } else { Trig::Cos };
                trig = Some((kind, (**a).clone(), alpha));
            }
            _ => return None,
        }
    }
    let free = Expr::mul(free);
    let body = match trig {
        None => x.powi(n + 1).scale(1.0 / f64::from(n + 1)),
        Some((kind, arg, alpha)) => by_parts(kind, &arg, alpha, &x, n),
    };
    Some(Expr::product(&free, &body))
}

/// `∫ v^n sin(w) dv` or `∫ v^n cos(w) dv` with `w = alpha*v + beta`.
fn by_parts(kind: Trig, w: &Expr, alpha: f64, x: &Expr, n: i32) -> Expr {
    let sin = w.sin();
    let cos = w.cos();
    let xn = x.powi(n);
    match kind {
        Trig::Sin => {
            let lead = Expr::product(&xn, &cos).scale(-1.0 / alpha);
            if n == 0 {
                return lead;
            }
            let rest = by_parts(Trig::Cos, w, alpha, x, n - 1).scale(f64::from(n) / alpha);
            Expr::sum(&lead, &rest)
        }
        Trig::Cos => {
            let lead = Expr::product(&xn, &sin).scale(1.0 / alpha);
            if n == 0 {
                return lead;
            }
            let rest = by_parts(Trig::Sin, w, alpha, x, n - 1).scale(-f64::from(n) / alpha);
            Expr::sum(&lead, &rest)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn p(s: &str) -> Expr {
        parse(s).unwrap()
    }

    #[test]
    fn derivative_rules() {
        assert_eq!(p("x1^3").diff(Var::X1), p("3*x1^2"));
        assert_eq!(p("sin(x2)").diff(Var::X2), p("cos(x2)"));
        assert_eq!(p("cos(2*x2)").diff(Var::X2), p("-2*sin(2*x2)"));
        assert_eq!(
            p("x2*sqrt(1 + x2^2)").diff(Var::X2),
            p("sqrt(1 + x2^2) + x2^2/sqrt(1 + x2^2)")
        );
        assert!(p("x1^2").diff(Var::X2).is_zero());
    }

    #[test]
    fn checked_rejects_sign_on_path() {
        assert!(p("sign(x1)*x2").diff_checked(Var::X1).is_err());
        assert_eq!(p("sign(x1)*x2").diff_checked(Var::X2).unwrap(), p("sign(x1)"));
        assert_eq!(p("abs(x1)").diff(Var::X1), p("sign(x1)"));
    }

    #[test]
    fn antiderivatives() {
        let a = |s: &str, v| p(s).antiderivative(v);
        assert_eq!(a("sin(x2)", Var::X2), Antiderivative::Closed(p("-cos(x2)")));
        assert_eq!(a("x2^3", Var::X2), Antiderivative::Closed(p("x2^4/4")));
        assert_eq!(a("sqrt(1 + x2^2)", Var::X2), Antiderivative::NotClosedForm);
        assert_eq!(a("x1*x2", Var::X2), Antiderivative::Closed(p("0.5*x1*x2^2")));
        assert_eq!(a("3", Var::X1), Antiderivative::Closed(p("3*x1")));
        assert_eq!(a("sin(x1)*sin(x2)", Var::X2), Antiderivative::Closed(p("-sin(x1)*cos(x2)")));
        assert_eq!(a("sin(x2)^2", Var::X2), Antiderivative::NotClosedForm);
    }

    #[test]
    fn by_parts_inverts_derivative() {
        for s in ["x2^2*sin(3*x2 + 1)", "x2*cos(x2 - x1)", "x2^3*cos(0.5*x2)"] {
            let e = p(s);
            let f = e.antiderivative(Var::X2).closed().unwrap();
            assert!(f.diff(Var::X2).approx_eq(&e, 1e-12), "{s}: {}", f.diff(Var::X2));
        }
    }
}
