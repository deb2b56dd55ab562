//! The four second-order cases.

use super::{
    stabilizing_root, ConditionKind as K, Draft, Predicate as P, Region as R, SynthError,
    SynthesisResult, ValueFunction,
};
use crate::domain::Domain;
use crate::model::{check_case, extract_case3, match_case2, split_f2, Case, SecondOrderSystem};
use crate::expr::{Expr, Var};

fn require(sys: &SecondOrderSystem, case: Case) -> Result<(), SynthError> {
    check_case(sys, case).map_err(SynthError::Unsupported)
}

fn only_in(name: &str, e: &Expr, v: Var) -> Result<(), SynthError> {
    if Var::all(3).any(|w| w != v && e.depends_on(w)) {
        return Err(SynthError::Precondition(format!(
            "{name} = {e} must be a function of {v} only"
        )));
    }
    Ok(())
}

fn smoothness(e: &Expr) -> P {
    if e.has_nonsmooth() {
        P::Undecided
    } else {
        P::Holds(true)
    }
}

fn scalar_cond(d: &mut Draft, id: &str, desc: &str, kind: K, ok: bool) {
    d.cond(id, desc, kind, R::Domain, P::Holds(ok));
}

/// `u = u2(x2)` from the stabilizing root, `L_state = -g f1 + Q2`,
/// `V = -(2r/b) ∫u2 dx2 + ∫g dx1`.
pub fn synthesize_case1(
    sys: &SecondOrderSystem,
    g: &Expr,
    q2: &Expr,
    domain: &Domain,
) -> Result<SynthesisResult, SynthError> {
    require(sys, Case::I)?;
    only_in("g", g, Var::X1)?;
    only_in("Q2", q2, Var::X2)?;
    if q2.is_zero() {
        return Err(SynthError::Precondition("Q2 must not be identically zero".into()));
    }
    let (b, r) = (sys.b, sys.r);
    let u = stabilizing_root(&sys.f2, q2, b, r, Var::X2, domain.bounds()[1])?;
    let l_state = Expr::sub(q2, &Expr::product(g, &sys.f1));
    let mut value = ValueFunction::closed(Expr::zero());
    value.add_integral(-2.0 * r / b, &u, Var::X2);
    value.add_integral(1.0, g, Var::X1);

    let mut d = Draft::new(Case::I, u.clone(), l_state, value);
    d.cond("Q2_nonnegative", "Q2(x2) >= 0", K::Hypothesis, R::Domain, P::NonNegative(q2.clone()));
    d.cond(
        "g_increasing",
        "g'(x1) > 0 for x1 != 0",
        K::Claim,
        R::Domain,
        P::PositiveAway { expr: g.diff(Var::X1), var: Var::X1 },
    );
    d.cond(
        "u2_decreasing",
        "u2'(x2) < 0 for x2 != 0",
        K::Claim,
        R::Domain,
        P::NegativeAway { expr: u.diff(Var::X2), var: Var::X2 },
    );
    d.cond("u2_continuous", "u2 is continuous", K::Informational, R::Domain, smoothness(&u));
    d.cond("u2_c1", "u2 is continuously differentiable", K::Informational, R::Domain, smoothness(&u));
    d.finish(domain)
}

/// `u = k f1(x2)`, `L_state = r k^2 f1^2 + (2rk/b) f1 f22`,
/// `V = -(2rk/b) (∫f1 dx2 - ∫f21 dx1)`.
pub fn synthesize_case1b(
    sys: &SecondOrderSystem,
    k: f64,
    domain: &Domain,
) -> Result<SynthesisResult, SynthError> {
    require(sys, Case::Ib)?;
    if k == 0.0 || !k.is_finite() {
        return Err(SynthError::Precondition("k must be finite and non-zero".into()));
    }
    let (b, r) = (sys.b, sys.r);
    let (f21, f22) = split_f2(sys)?;
    let f1 = &sys.f1;
    let u = f1.scale(k);
    let cross = Expr::product(f1, &f22);
    let l_state = Expr::sum(&f1.powi(2).scale(r * k * k), &cross.scale(2.0 * r * k / b));
    let w = -2.0 * r * k / b;
    let mut value = ValueFunction::closed(Expr::zero());
    value.add_integral(w, f1, Var::X2);
    value.add_integral(-w, &f21, Var::X1);

    let mut d = Draft::new(Case::Ib, u, l_state, value);
    d.gain("k", k);
    d.cond(
        "cross_term_nonnegative",
        "b^-1 k f1 f22 >= 0",
        K::Hypothesis,
        R::Domain,
        P::NonNegative(cross.scale(k / b)),
    );
    d.cond(
        "f1_slope",
        "b^-1 k f1'(x2) < 0 for x2 != 0",
        K::Claim,
        R::Domain,
        P::NegativeAway { expr: f1.diff(Var::X2).scale(k / b), var: Var::X2 },
    );
    d.cond(
        "f21_slope",
        "b^-1 k f21'(x1) > 0 for x1 != 0",
        K::Claim,
        R::Domain,
        P::PositiveAway { expr: f21.diff(Var::X1).scale(k / b), var: Var::X1 },
    );
    d.finish(domain)
}

/// `u = u1(x1) - k2 x2` with `u1` the stabilizing root for `(g3, Q1)` and
/// `k2 = sign(b) sqrt(q2/r)`.
pub fn synthesize_case2(
    sys: &SecondOrderSystem,
    big_q1: &Expr,
    q2: f64,
    domain: &Domain,
) -> Result<SynthesisResult, SynthError> {
    require(sys, Case::II)?;
    let parts = match_case2(sys).map_err(SynthError::Unsupported)?;
    only_in("Q1", big_q1, Var::X1)?;
    if !(q2 > 0.0 && q2.is_finite()) {
        return Err(SynthError::Precondition("q2 must be positive".into()));
    }
    let (b, r) = (sys.b, sys.r);
    let (g1, g2, g3, g4) = (&parts.g1, &parts.g2, &parts.g3, &parts.g4);
    let x2 = Expr::x(2);
    let u1 = stabilizing_root(g3, big_q1, b, r, Var::X1, domain.bounds()[0])?;
    let du1 = u1.diff(Var::X1);
    let k2 = b.signum() * (q2 / r).sqrt();
    let u = Expr::sub(&u1, &x2.scale(k2));

    let numer = Expr::add(vec![
        Expr::sum(&u1, &g3.scale(1.0 / b)).scale(-2.0 * r * k2),
        Expr::sum(&Expr::product(&u1, g4), &Expr::product(&du1, g1)).scale(2.0 * r / b),
    ]);
    let hp = Expr::div(&numer, g2);
    if hp.depends_on(Var::X2) {
        return Err(SynthError::Unsupported(format!("h'(x1) = {hp} is not free of x2")));
    }
    let weight_expr = Expr::sum(
        &Expr::constant(k2 * k2),
        &Expr::sub(&Expr::product(&du1, g2), &g4.scale(k2)).scale(2.0 / b),
    );
    let hg1 = Expr::product(&hp, g1);
    let l_state = Expr::add(vec![
        big_q1.clone(),
        x2.powi(2).scale(q2),
        Expr::product(&Expr::sub(&Expr::product(&du1, g2), &g4.scale(k2)), &x2.powi(2))
            .scale(2.0 * r / b),
        hg1.neg(),
    ]);
    let mut value = ValueFunction::closed(Expr::sum(
        &Expr::product(&x2, &u1).scale(-2.0 * r / b),
        &x2.powi(2).scale(r * k2 / b),
    ));
    value.add_integral(1.0, &hp, Var::X1);

    let mut d = Draft::new(Case::II, u, l_state, value);
    d.gain("k2", k2);
    d.cond("Q1_nonnegative", "Q1(x1) >= 0", K::Hypothesis, R::Domain, P::NonNegative(big_q1.clone()));
    d.cond("g2_nonvanishing", "g2(x1) != 0", K::Hypothesis, R::Domain, P::NonZero(g2.clone()));
    d.cond(
        "weight_constraint",
        "k2^2 + 2 b^-1 (u1' g2 - k2 g4) >= 0",
        K::Hypothesis,
        R::Domain,
        P::NonNegative(weight_expr),
    );
    d.cond("hg1_nonpositive", "h'(x1) g1(x1) <= 0", K::Hypothesis, R::Domain, P::NonPositive(hg1));
    d.cond("u1_c1", "u1 is continuously differentiable", K::Informational, R::Domain, smoothness(&u1));
    d.finish(domain)
}

/// Linear-plus-nonlinearity feedback for `f1 = a x1 + f(x2)`,
/// `f2 = c x1 + d f(x2)`.
pub fn synthesize_case3(
    sys: &SecondOrderSystem,
    q1: f64,
    q2: f64,
    domain: &Domain,
) -> Result<SynthesisResult, SynthError> {
    let parts = extract_case3(sys).ok_or_else(|| {
        SynthError::Unsupported("f1, f2 are not of the form a*x1 + f(x2), c*x1 + d*f(x2)".into())
    })?;
    let (a, c, dd, f) = (parts.a, parts.c, parts.d, &parts.f);
    let (b, r) = (sys.b, sys.r);
    if a == 0.0 && c != 0.0 {
        return Err(SynthError::Precondition("a = 0 requires c = 0".into()));
    }
    if !(q2 > 0.0 && q2.is_finite()) {
        return Err(SynthError::Precondition("q2 must be positive".into()));
    }
    let mut warnings = Vec::new();
    let q1 = if a != 0.0 {
        let derived = q2 * c * c / (a * a) + 2.0 * r * c * (a * dd - c) / (b * b);
        if (derived - q1).abs() > 1e-12 * derived.abs().max(1.0) {
            warnings.push(format!("q1 = {q1} replaced by the value {derived} implied by a != 0"));
        }
        derived
    } else {
        if q1 < q2 * dd * dd {
            return Err(SynthError::Precondition(format!(
                "a = 0 requires q1 >= q2 d^2 (q1 = {q1}, q2 d^2 = {})",
                q2 * dd * dd
            )));
        }
        q1
    };
    let k2 = (q2 / r).sqrt();
    let k1 = if a != 0.0 { -c * k2 / a } else { (q1 / r).sqrt() };
    let k = (dd + k1 / k2) / b;
    let (x1, x2) = (Expr::x(1), Expr::x(2));
    let u = Expr::add(vec![x1.scale(-k1), x2.scale(-k2), f.scale(-k)]);
    let l_state = Expr::add(vec![
        x1.powi(2).scale(q1),
        x2.powi(2).scale(q2),
        Expr::product(&x1, &x2).scale(2.0 * r * k1 * k2),
        f.powi(2).scale(r * (k1 * k1 / (k2 * k2) - dd * dd) / (b * b)),
    ]);
    let sq = Expr::sum(&x1.scale(k1 / k2.sqrt()), &x2.scale(k2.sqrt()));
    let mut value = ValueFunction::closed(Expr::sum(
        &x1.powi(2).scale(-r * k * c / b),
        &sq.powi(2).scale(r / b),
    ));
    value.add_integral(2.0 * r * k / b, f, Var::X2);
    let mut kf = ValueFunction::closed(Expr::zero());
    kf.add_integral(k, f, Var::X2);

    let mut d = Draft::new(Case::III, u, l_state, value);
    for (name, v) in [("a", a), ("c", c), ("d", dd), ("q1", q1), ("k1", k1), ("k2", k2), ("k", k)] {
        d.gain(name, v);
    }
    d.warnings = warnings;
    scalar_cond(&mut d, "a_zero_implies_c_zero", "a = 0 implies c = 0", K::Hypothesis, true);
    scalar_cond(&mut d, "c_ad_minus_c", "c (a d - c) >= 0", K::Hypothesis, c * (a * dd - c) >= 0.0);
    scalar_cond(&mut d, "c2_ge_a2d2", "c^2 >= a^2 d^2", K::Hypothesis, c * c >= a * a * dd * dd);
    if b > 0.0 {
        scalar_cond(&mut d, "b_positive", "b > 0 (Lyapunov claim)", K::Claim, true);
    } else {
        d.cond("b_positive", "b > 0 (Lyapunov claim)", K::Claim, R::Domain, P::Undecided);
    }
    scalar_cond(&mut d, "kc_nonpositive", "k c <= 0", K::Claim, k * c <= 0.0);
    d.cond(
        "kF_locally_pd",
        "k (F(x2) - F(0)) is locally positive definite",
        K::Claim,
        R::Local,
        P::PositiveDefiniteIn {
            value: kf,
            var: Var::X2,
        },
    );
    d.finish(domain)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::synth::Status;

    fn p(s: &str) -> Expr {
        parse(s).unwrap()
    }

    fn sys(f1: &str, f2: &str) -> SecondOrderSystem {
        SecondOrderSystem::new(p(f1), p(f2), 1.0, 1.0).unwrap()
    }

    fn dom() -> Domain {
        Domain::cube(2, 2.0)
    }

    #[test]
    fn van_der_pol_closed_forms() {
        let s = sys("x2", "-x1 + 0.5*(1 - x1^2)*x2");
        let res = synthesize_case2(&s, &Expr::zero(), 1.0, &dom()).unwrap();
        assert_eq!(res.u, p("-x2"));
        assert_eq!(res.value.as_expr().unwrap(), &p("x1^2 + x2^2"));
        assert_eq!(res.l_state, p("x1^2*x2^2"));
    }

    #[test]
    fn case1b_reference() {
        let s = sys("x2", "-x1");
        let res = synthesize_case1b(&s, -1.0, &dom()).unwrap();
        assert_eq!(res.u, p("-x2"));
        assert_eq!(res.l_state, p("x2^2"));
        assert_eq!(res.value.as_expr().unwrap(), &p("x1^2 + x2^2"));
        let flipped = synthesize_case1b(&s, 1.0, &dom()).unwrap();
        assert_eq!(flipped.condition("f1_slope").unwrap().status, Status::Failed);
        assert_eq!(flipped.condition("f21_slope").unwrap().status, Status::Failed);
    }

    #[test]
    fn case1_rejects_zero_weight() {
        let s = sys("-x1", "-x2");
        assert!(synthesize_case1(&s, &Expr::zero(), &Expr::zero(), &dom()).is_err());
        assert!(matches!(
            synthesize_case1(&sys("x2", "-x1"), &p("x1"), &p("x2^2"), &dom()),
            Err(SynthError::Unsupported(m)) if m == "f2 not free of x1"
        ));
    }

    #[test]
    fn case3_linear_controller() {
        let s = sys("-x1 + sin(x2)", "x1 - sin(x2)");
        let res = synthesize_case3(&s, 1.0, 1.0, &dom()).unwrap();
        assert_eq!(res.gains["k"], 0.0);
        assert_eq!(res.u, p("-x1 - x2"));
        assert_eq!(res.value.as_expr().unwrap(), &p("(x1 + x2)^2"));
        assert!(res.warnings.is_empty());
        let warned = synthesize_case3(&s, 5.0, 1.0, &dom()).unwrap();
        assert_eq!(warned.warnings.len(), 1);
    }

    #[test]
    fn case3_rejects_small_q1() {
        let s = sys("x2", "2*x2");
        assert!(synthesize_case3(&s, 1.0, 1.0, &dom()).is_err());
    }
}
