use super::canon::{make_term, split_coeff};
use super::{Expr, Var};

/// `e == offset + coeff * v`, with `coeff` and `offset` free of `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct Affine {
    pub coeff: Expr,
    pub offset: Expr,
}

fn factors_of(mono: Expr) -> Vec<Expr> {
    match mono {
        Expr::Mul(fs) => fs,
        other => vec![other],
    }
}

fn sum_terms(e: &Expr) -> Vec<Expr> {
    match e {
        Expr::Add(ts) => ts.clone(),
        other => vec![other.clone()],
    }
}

pub(super) fn match_affine(e: &Expr, v: Var) -> Option<Affine> {
    let x = Expr::var(v);
    let mut coeff = Vec::new();
    let mut offset = Vec::new();
    for t in sum_terms(e) {
        if !t.depends_on(v) {
            offset.push(t);
            continue;
        }
        let (c, mono) = split_coeff(&t);
        let mut rest = vec![Expr::constant(c)];
        let mut linear = 0;
        for f in factors_of(mono?) {
            if f == x {
                linear += 1;
            } else if f.depends_on(v) {
                return None;
            } else {
                rest.push(f);
            }
        }
        if linear != 1 {
            return None;
        }
        coeff.push(Expr::mul(rest));
    }
    let aff = Affine {
        coeff: Expr::add(coeff),
        offset: Expr::add(offset),
    };
    let check = Expr::add(vec![
        e.clone(),
        aff.offset.neg(),
        Expr::product(&aff.coeff, &x).neg(),
    ]);
    check.is_zero().then_some(aff)
}

pub(super) fn terms(e: &Expr) -> Vec<(f64, Expr)> {
    if e.is_zero() {
        return Vec::new();
    }
    sum_terms(e)
        .iter()
        .map(|t| {
            let (c, m) = split_coeff(t);
            (c, m.unwrap_or_else(Expr::one))
        })
        .collect()
}

pub(super) fn proportional(a: &Expr, b: &Expr) -> Option<f64> {
    if a.is_zero() {
        return Some(0.0);
    }
    if b.is_zero() {
        return None;
    }
    let ta = terms(a);
    let tb = terms(b);
    if ta.len() != tb.len() {
        return None;
    }
    let ratio = ta[0].0 / tb[0].0;
    for ((ca, ma), (cb, mb)) in ta.iter().zip(&tb) {
        if ma != mb {
            return None;
        }
        let r = ca / cb;
        if (r - ratio).abs() > 1e-12 * ratio.abs().max(r.abs()) {
            return None;
        }
    }
    Some(ratio)
}

pub(super) fn divide_by_square(e: &Expr, v: Var) -> Option<Expr> {
    if e.is_zero() {
        return Some(Expr::zero());
    }
    let inv_sq = Expr::var(v).powi(-2);
    let mut out = Vec::new();
    for t in sum_terms(e) {
        let q = Expr::product(&t, &inv_sq);
        let (c, mono) = split_coeff(&q);
        if let Some(m) = &mono {
            for f in factors_of(m.clone()) {
                if let Expr::Pow(b, k) = &f {
                    if k.is_negative() && b.depends_on(v) {
                        return None;
                    }
                }
            }
        }
        out.push(make_term(c, mono));
    }
    Some(Expr::add(out))
}

pub(super) fn manifestly_nonnegative(e: &Expr) -> bool {
    terms(e).iter().all(|(c, m)| {
        *c >= 0.0 && factors_of(m.clone()).iter().all(nonnegative_factor)
    })
}

fn nonnegative_factor(f: &Expr) -> bool {
    match f {
        Expr::Const(c) => *c >= 0.0,
        Expr::Abs(_) => true,
        Expr::Pow(b, k) => {
            !k.is_integer() || k.as_int().is_some_and(|n| n % 2 == 0) || nonnegative_factor(b)
        }
        _ => false,
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
    fn affine_split() {
        let a = p("x1^2 + sin(x1)*x2").match_affine(Var::X2).unwrap();
        assert_eq!(a.coeff, p("sin(x1)"));
        assert_eq!(a.offset, p("x1^2"));
        assert!(p("x1*x2^2").match_affine(Var::X2).is_none());
        let a = p("3*x1 + sin(x2)").match_affine(Var::X1).unwrap();
        assert_eq!(a.coeff, p("3"));
        assert_eq!(a.offset, p("sin(x2)"));
        assert!(p("sin(x2)").match_affine(Var::X2).is_none());
        let a = p("x1^3").match_affine(Var::X2).unwrap();
        assert!(a.coeff.is_zero());
    }

    #[test]
    fn proportionality() {
        assert_eq!(p("2*sin(x2) + 4*x2").proportional_to(&p("x2 + 0.5*sin(x2)")), Some(4.0));
        assert_eq!(p("x1*x2").proportional_to(&p("x2")), None);
        assert_eq!(p("0").proportional_to(&p("x2")), Some(0.0));
    }

    #[test]
    fn square_division() {
        assert_eq!(p("x2^2 + x2^4").divide_by_square(Var::X2), Some(p("1 + x2^2")));
        assert_eq!(p("x2^2 + x2").divide_by_square(Var::X2), None);
        assert_eq!(
            p("3*x2^2*(1 + x2^2)").divide_by_square(Var::X2),
            Some(p("3 + 3*x2^2"))
        );
    }

    #[test]
    fn nonnegativity() {
        assert!(p("x2^2 + x2^4").is_manifestly_nonnegative());
        assert!(p("3*x1^2*sqrt(1 + x2^2)").is_manifestly_nonnegative());
        assert!(!p("x2^2 - x1^2").is_manifestly_nonnegative());
        assert!(!p("x1^3").is_manifestly_nonnegative());
    }
}
