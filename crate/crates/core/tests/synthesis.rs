use hjb_core::domain::Domain;
use hjb_core::expr::{parse, Expr};
use hjb_core::model::{classify, CaseTag, SecondOrderSystem, System, ThirdOrderSystem};
use hjb_core::synth::{
    hjb_residual, synthesize_case2, synthesize_case3, synthesize_third_order, Status,
    SynthesisResult,
};

fn p(s: &str) -> Expr {
    parse(s).unwrap()
}

fn second(f1: &str, f2: &str, b: f64, r: f64) -> SecondOrderSystem {
    SecondOrderSystem::new(p(f1), p(f2), b, r).unwrap()
}

fn grid2() -> Vec<Vec<f64>> {
    Domain::cube(2, 2.0).grid(21)
}

fn assert_expr_on_grid(actual: &Expr, expected: &str, pts: &[Vec<f64>]) {
    let e = p(expected);
    for x in pts {
        let (a, b) = (actual.eval(x).unwrap(), e.eval(x).unwrap());
        assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()), "{actual} vs {expected} at {x:?}: {a} != {b}");
    }
}

fn assert_value_on_grid(r: &SynthesisResult, expected: &str, pts: &[Vec<f64>]) {
    let e = p(expected);
    let v = r.value.compile();
    for x in pts {
        let (a, b) = (v.eval(x).unwrap(), e.eval(x).unwrap());
        assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()), "V = {} vs {expected} at {x:?}", r.value);
    }
}

fn assert_hjb(sys: &System, r: &SynthesisResult, pts: &[Vec<f64>]) {
    for x in pts {
        let h = hjb_residual(r, sys, x).unwrap();
        let l = r.l_state.eval(x).unwrap();
        assert!(h.abs() <= 1e-8 * (1.0 + l.abs()), "residual {h} at {x:?}");
    }
}

#[test]
fn mass_spring_with_general_weights() {
    // q2 = 4, r = 1: u = -2 x2, V = 2 (x2^2 + x1^4 / 2).
    let s = second("x2", "-x1^3", 1.0, 1.0);
    let d = Domain::cube(2, 2.0);
    let r = synthesize_case2(&s, &p("0"), 4.0, &d).unwrap();
    let pts = grid2();
    assert_expr_on_grid(&r.u, "-2*x2", &pts);
    assert_value_on_grid(&r, "2*x2^2 + x1^4", &pts);
    assert_expr_on_grid(&r.l_state, "4*x2^2", &pts);
    assert_hjb(&System::Second(s), &r, &pts);
}

#[test]
fn strict_feedback_family() {
    for (q1, q2) in [(1.0f64, 4.0f64), (4.0, 5.0)] {
        let s = second("-x1^3 + x2", "0", 1.0, 1.0);
        let d = Domain::cube(2, 2.0);
        let r = synthesize_case2(&s, &p(&format!("{q1}*x1^2")), q2, &d).unwrap();
        let (a, c) = (q1.sqrt(), q2.sqrt());
        let pts = grid2();
        assert_expr_on_grid(&r.u, &format!("-{a}*x1 - {c}*x2"), &pts);
        assert_expr_on_grid(
            &r.l_state,
            &format!("{q1}*x1^2 + 2*{}*x1^4 + 2*{a}*x1^6 + ({q2} - 2*{a})*x2^2", (q1 * q2).sqrt()),
            &pts,
        );
        assert_value_on_grid(
            &r,
            &format!("2*{a}*x1*x2 + {c}*(x2^2 + {a}*x1^2) + 2*{a}*x1^4/4"),
            &pts,
        );
        assert!(!r.condition("weight_constraint").unwrap().status.is_failed());
        assert_hjb(&System::Second(s), &r, &pts);
    }
}

#[test]
fn strict_feedback_weight_constraint_violated() {
    // q2 < 2 sqrt(q1) makes part of the running cost negative.
    let s = second("-x1^3 + x2", "0", 1.0, 1.0);
    let r = synthesize_case2(&s, &p("4*x1^2"), 3.0, &Domain::cube(2, 2.0)).unwrap();
    assert_eq!(r.condition("weight_constraint").unwrap().status, Status::Failed);
    assert_eq!(r.condition("running_cost_nonnegative").unwrap().status, Status::Failed);
}

#[test]
fn linear_combination_with_general_parameters() {
    // a = 2, c = 1, d = c/a, b = 2, q2 = 4, r = 1: k2 = 2, q1 = 1, k = 0.
    let s = second("2*x1 + x2^3", "x1 + 0.5*x2^3", 2.0, 1.0);
    let r = synthesize_case3(&s, 1.0, 4.0, &Domain::cube(2, 2.0)).unwrap();
    let pts = grid2();
    assert_expr_on_grid(&r.u, "-2*(x2 - 0.5*x1)", &pts);
    assert_value_on_grid(&r, "(x2 - 0.5*x1)^2", &pts);
    assert_expr_on_grid(&r.l_state, "4*(x2 - 0.5*x1)^2", &pts);
    assert!(r.gains["k"].abs() < 1e-15);
    assert_hjb(&System::Second(s), &r, &pts);
}

#[test]
fn case3_with_coupling_has_consistent_hjb() {
    // a = -1, c = 2, d = -2 sits on the boundary of both structural inequalities.
    let s = second("-x1 + sin(x2)", "2*x1 - 2*sin(x2)", 1.0, 2.0);
    let r = synthesize_case3(&s, 0.0, 3.0, &Domain::cube(2, 2.0)).unwrap();
    assert!(!r.warnings.is_empty(), "q1 is overridden when a != 0");
    for id in ["c_ad_minus_c", "c2_ge_a2d2"] {
        assert!(!r.condition(id).unwrap().status.is_failed(), "{id}");
    }
    assert_hjb(&System::Second(s), &r, &grid2());
}

#[test]
fn third_order_with_drift_coupling() {
    // d != 0 and a polynomial f; k4 = (k1 + d k2) / (b k3), k5 = k2 / (b k3).
    let s = ThirdOrderSystem::new(p("x2 + x2^3"), p("x3"), 0.5, 2.0, 1.0, 4.0, 9.0, 1.0).unwrap();
    let d = Domain::cube(3, 1.0);
    let r = synthesize_third_order(&s, &d).unwrap();
    let (k1, k2, k3) = (1.0, 2.0, 3.0);
    assert!((r.gains["k4"] - (k1 + 0.5 * k2) / (2.0 * k3)).abs() < 1e-15);
    assert!((r.gains["k5"] - k2 / (2.0 * k3)).abs() < 1e-15);
    assert_hjb(&System::Third(s), &r, &d.grid(11));
}

#[test]
fn case2_with_nonlinear_damping() {
    let s = second("x2", "-x1 - x1^3 + (1 + 0.1*x1^2)*x2", 1.0, 1.0);
    let r = synthesize_case2(&s, &p("x1^2"), 9.0, &Domain::cube(2, 2.0)).unwrap();
    assert_hjb(&System::Second(s), &r, &grid2());
}

#[test]
fn classification_of_the_examples() {
    let uni = second("sin(x2)", "0", 1.0, 1.0);
    assert_eq!(classify(&uni), vec![CaseTag::CaseIII]);
    let vdp = second("x2", "-x1 + 0.5*(1 - x1^2)*x2", 1.0, 1.0);
    assert!(classify(&vdp).contains(&CaseTag::CaseII));
    let odd = second("x1*x2^2", "x1*x2^2", 1.0, 1.0);
    assert!(matches!(classify(&odd).as_slice(), [CaseTag::Unsupported(_)]));
}
