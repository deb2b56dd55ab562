//! Third-order chains `x1' = f(x2)`, `x2' = d f(x2) + g(x3)`, `x3' = b u`.

use super::{ConditionKind as K, Draft, Predicate as P, Region as R, SynthError, SynthesisResult, ValueFunction};
use crate::domain::Domain;
use crate::expr::{Expr, Var};
use crate::model::{Case, ThirdOrderSystem};
use crate::verify::hessian_pd_region;

pub fn synthesize_third_order(
    sys: &ThirdOrderSystem,
    domain: &Domain,
) -> Result<SynthesisResult, SynthError> {
    let ThirdOrderSystem {
        f,
        g,
        d,
        b,
        q1,
        q2,
        q3,
        r,
    } = sys;
    let (d, b, r) = (*d, *b, *r);
    let k1 = (q1 / r).sqrt();
    let k2 = (q2 / r).sqrt();
    let k3 = (q3 / r).sqrt();
    let k4 = (k1 + d * k2) / (b * k3);
    let k5 = k2 / (b * k3);
    let (x1, x2, x3) = (Expr::x(1), Expr::x(2), Expr::x(3));

    let u = Expr::add(vec![
        x1.scale(-k1),
        x2.scale(-k2),
        x3.scale(-k3),
        f.scale(-k4),
        g.scale(-k5),
    ]);
    let x2_rate = Expr::sum(&f.scale(d), g);
    let q = Expr::add(vec![
        Expr::product(&x1, &x2).scale(2.0 * r * k1 * k2),
        Expr::product(&x1, &x3).scale(2.0 * r * k1 * k3),
        Expr::product(&x2, &x3).scale(2.0 * r * k2 * k3),
        f.powi(2).scale(r * (k4 * k4 - 2.0 * d * k4 * k5)),
        g.powi(2).scale(r * k5 * k5),
        Expr::mul(vec![f.diff(Var::X2), x3.clone(), x2_rate]).scale(-2.0 * r * k4 / b),
    ]);
    let l_state = Expr::add(vec![
        x1.powi(2).scale(*q1),
        x2.powi(2).scale(*q2),
        x3.powi(2).scale(*q3),
        q,
    ]);
    let s3 = k3.sqrt();
    let sq = Expr::add(vec![x1.scale(k1 / s3), x2.scale(k2 / s3), x3.scale(s3)]);
    let mut value = ValueFunction::closed(Expr::sum(
        &sq.powi(2).scale(r / b),
        &Expr::product(&x3, f).scale(2.0 * r * k4 / b),
    ));
    value.add_integral(2.0 * r * k4 * k5, f, Var::X2);
    value.add_integral(2.0 * r * k5 / b, g, Var::X3);
    let mut big_g = ValueFunction::closed(Expr::zero());
    big_g.add_integral(1.0, g, Var::X3);

    let mut dr = Draft::new(Case::Third, u, l_state, value);
    for (name, v) in [("k1", k1), ("k2", k2), ("k3", k3), ("k4", k4), ("k5", k5)] {
        dr.gain(name, v);
    }
    dr.local_region = hessian_pd_region(&dr.value, domain, 21).region;
    dr.cond(
        "G_locally_pd",
        "G(x3) - G(0) is locally positive definite",
        K::Hypothesis,
        R::Local,
        P::PositiveDefiniteIn {
            value: big_g,
            var: Var::X3,
        },
    );
    dr.finish(domain)
}
