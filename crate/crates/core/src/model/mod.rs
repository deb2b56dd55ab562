//! Problem instances and the structural classifier.

mod file;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{Expr, ExprError, Var};

pub use file::{load_problem, parse_problem, Expected, FileFormat, Problem, ProblemFileError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ModelError> {
    Err(ModelError::Invalid(msg.into()))
}

/// `x1' = f1(x1,x2)`, `x2' = f2(x1,x2) + b u`, running cost weight `r u^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondOrderSystem {
    pub f1: Expr,
    pub f2: Expr,
    pub b: f64,
    pub r: f64,
}

impl SecondOrderSystem {
    pub fn new(f1: Expr, f2: Expr, b: f64, r: f64) -> Result<SecondOrderSystem, ModelError> {
        for (name, e) in [("f1", &f1), ("f2", &f2)] {
            if e.depends_on(Var::X3) {
                return invalid(format!("{name} depends on x3 in a second-order system"));
            }
            if e.eval(&[0.0, 0.0])?.abs() > 1e-12 {
                return invalid(format!("{name}(0,0) must be 0"));
            }
        }
        if f1.is_zero() {
            return invalid("f1 is identically zero");
        }
        check_b_r(b, r)?;
        Ok(SecondOrderSystem { f1, f2, b, r })
    }
}

fn check_b_r(b: f64, r: f64) -> Result<(), ModelError> {
    if b == 0.0 || !b.is_finite() {
        return invalid("b must be finite and non-zero");
    }
    if r <= 0.0 || !r.is_finite() {
        return invalid("r must be finite and positive");
    }
    Ok(())
}

/// `x1' = f(x2)`, `x2' = d f(x2) + g(x3)`, `x3' = b u` with state weights
/// `q1 x1^2 + q2 x2^2 + q3 x3^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThirdOrderSystem {
    pub f: Expr,
    pub g: Expr,
    pub d: f64,
    pub b: f64,
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
    pub r: f64,
}

impl ThirdOrderSystem {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        f: Expr,
        g: Expr,
        d: f64,
        b: f64,
        q1: f64,
        q2: f64,
        q3: f64,
        r: f64,
    ) -> Result<ThirdOrderSystem, ModelError> {
        for (name, e, v) in [("f", &f, Var::X2), ("g", &g, Var::X3)] {
            if Var::all(3).any(|w| w != v && e.depends_on(w)) {
                return invalid(format!("{name} must depend on {v} only"));
            }
            if e.is_zero() {
                return invalid(format!("{name} is identically zero"));
            }
            if e.eval(&[0.0; 3])?.abs() > 1e-12 {
                return invalid(format!("{name}(0) must be 0"));
            }
        }
        if !d.is_finite() {
            return invalid("d must be finite");
        }
        if !(q1 >= 0.0 && q2 >= 0.0 && q1.is_finite() && q2.is_finite()) {
            return invalid("q1 and q2 must be non-negative");
        }
        if !(q3 > 0.0 && q3.is_finite()) {
            return invalid("q3 must be positive");
        }
        check_b_r(b, r)?;
        Ok(ThirdOrderSystem {
            f,
            g,
            d,
            b,
            q1,
            q2,
            q3,
            r,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "order_kind", rename_all = "snake_case")]
pub enum System {
    Second(SecondOrderSystem),
    Third(ThirdOrderSystem),
}

impl System {
    pub fn order(&self) -> usize {
        match self {
            System::Second(_) => 2,
            System::Third(_) => 3,
        }
    }

    /// Open-loop drift, one expression per state.
    pub fn drift(&self) -> Vec<Expr> {
        match self {
            System::Second(s) => vec![s.f1.clone(), s.f2.clone()],
            System::Third(s) => vec![
                s.f.clone(),
                Expr::sum(&s.f.scale(s.d), &s.g),
                Expr::zero(),
            ],
        }
    }

    pub fn b(&self) -> f64 {
        match self {
            System::Second(s) => s.b,
            System::Third(s) => s.b,
        }
    }

    pub fn r(&self) -> f64 {
        match self {
            System::Second(s) => s.r,
            System::Third(s) => s.r,
        }
    }

    /// The state the input enters.
    pub fn input_var(&self) -> Var {
        Var::from_index(self.order() - 1)
    }
}

/// Case-specific cost parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "case")]
pub enum CostSpec {
    #[serde(rename = "I")]
    CaseI {
        g: Expr,
        #[serde(rename = "Q2")]
        q2: Expr,
    },
    #[serde(rename = "Ib")]
    CaseIb { k: f64 },
    #[serde(rename = "II")]
    CaseII {
        #[serde(rename = "Q1")]
        q1: Expr,
        q2: f64,
    },
    #[serde(rename = "III")]
    CaseIII { q1: f64, q2: f64 },
    #[serde(rename = "third")]
    ThirdOrder,
}

impl CostSpec {
    pub fn case(&self) -> Case {
        match self {
            CostSpec::CaseI { .. } => Case::I,
            CostSpec::CaseIb { .. } => Case::Ib,
            CostSpec::CaseII { .. } => Case::II,
            CostSpec::CaseIII { .. } => Case::III,
            CostSpec::ThirdOrder => Case::Third,
        }
    }
}

/// The structural cases, without payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Case {
    I,
    Ib,
    II,
    III,
    #[serde(rename = "third")]
    Third,
}

impl Case {
    pub const SECOND_ORDER: [Case; 4] = [Case::I, Case::Ib, Case::II, Case::III];
    /// Preference when several cases apply.
    pub const PRIORITY: [Case; 4] = [Case::III, Case::II, Case::I, Case::Ib];

    pub fn tag(self) -> CaseTag {
        match self {
            Case::I => CaseTag::CaseI,
            Case::Ib => CaseTag::CaseIb,
            Case::II => CaseTag::CaseII,
            Case::III => CaseTag::CaseIII,
            Case::Third => CaseTag::ThirdOrder,
        }
    }
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            Case::I => "I",
            Case::Ib => "Ib",
            Case::II => "II",
            Case::III => "III",
            Case::Third => "third",
        })
    }
}

impl FromStr for Case {
    type Err = String;

    fn from_str(s: &str) -> Result<Case, String> {
        match s {
            "I" | "i" | "1" => Ok(Case::I),
            "Ib" | "ib" | "1b" => Ok(Case::Ib),
            "II" | "ii" | "2" => Ok(Case::II),
            "III" | "iii" | "3" => Ok(Case::III),
            "third" | "3rd" => Ok(Case::Third),
            other => Err(format!("unknown case `{other}` (expected I, Ib, II, III or third)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum CaseTag {
    CaseI,
    CaseIb,
    CaseII,
    CaseIII,
    ThirdOrder,
    Unsupported(String),
}

impl CaseTag {
    pub fn case(&self) -> Option<Case> {
        match self {
            CaseTag::CaseI => Some(Case::I),
            CaseTag::CaseIb => Some(Case::Ib),
            CaseTag::CaseII => Some(Case::II),
            CaseTag::CaseIII => Some(Case::III),
            CaseTag::ThirdOrder => Some(Case::Third),
            CaseTag::Unsupported(_) => None,
        }
    }
}

impl fmt::Display for CaseTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let text = match self {
            CaseTag::ThirdOrder => "ThirdOrder".to_string(),
            CaseTag::Unsupported(reason) => format!("unsupported ({reason})"),
            other => format!("Case{}", other.case().unwrap()),
        };
        f.pad(&text)
    }
}

/// `f1 = g1 + g2 x2`, `f2 = g3 + g4 x2` with every `gi` a function of `x1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Case2Parts {
    pub g1: Expr,
    pub g2: Expr,
    pub g3: Expr,
    pub g4: Expr,
}

/// `f1 = a x1 + f(x2)`, `f2 = c x1 + d f(x2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Case3Parts {
    pub a: f64,
    pub c: f64,
    pub d: f64,
    pub f: Expr,
}

/// Every case whose structural hypotheses hold, or a single
/// [`CaseTag::Unsupported`] collecting the reasons none applies.
pub fn classify(sys: &SecondOrderSystem) -> Vec<CaseTag> {
    let mut tags = Vec::new();
    let mut reasons = Vec::new();
    for case in Case::SECOND_ORDER {
        match check_case(sys, case) {
            Ok(()) => tags.push(case.tag()),
            Err(why) => reasons.push(format!("Case{case}: {why}")),
        }
    }
    if tags.is_empty() {
        tags.push(CaseTag::Unsupported(reasons.join("; ")));
    }
    tags
}

/// Whether the structural hypothesis of `case` holds, with the reason if not.
pub fn check_case(sys: &SecondOrderSystem, case: Case) -> Result<(), String> {
    match case {
        Case::I => {
            if sys.f2.depends_on(Var::X1) {
                Err("f2 not free of x1".into())
            } else if sys.f2.is_zero() {
                Err("f2 is identically zero".into())
            } else {
                Ok(())
            }
        }
        Case::Ib => {
            if sys.f1.depends_on(Var::X1) {
                return Err("f1 not free of x1".into());
            }
            let (f21, _) = split_f2(sys).map_err(|e| e.to_string())?;
            if f21.is_zero() {
                return Err("f2 has no x2-free part f21(x1)".into());
            }
            Ok(())
        }
        Case::II => match_case2(sys).map(|_| ()),
        Case::III => extract_case3(sys)
            .map(|_| ())
            .ok_or_else(|| "f1, f2 are not of the form a*x1 + f(x2), c*x1 + d*f(x2)".into()),
        Case::Third => Err("not a third-order system".into()),
    }
}

/// Splits `f2` into the terms free of `x2` and the rest.
pub fn split_f2(sys: &SecondOrderSystem) -> Result<(Expr, Expr), ModelError> {
    let (free, rest): (Vec<_>, Vec<_>) = match &sys.f2 {
        Expr::Add(ts) => ts.iter().cloned().partition(|t| !t.depends_on(Var::X2)),
        t if !t.depends_on(Var::X2) => (vec![t.clone()], vec![]),
        t => (vec![], vec![t.clone()]),
    };
    let f21 = Expr::add(free);
    let f22 = Expr::add(rest);
    if f22.eval(&[0.0, 0.0])?.abs() > 1e-12 {
        return invalid(format!("f22 = {f22} does not vanish at the origin"));
    }
    Ok((f21, f22))
}

pub fn match_case2(sys: &SecondOrderSystem) -> Result<Case2Parts, String> {
    let a1 = sys
        .f1
        .match_affine(Var::X2)
        .ok_or("f1 not affine in x2")?;
    let a2 = sys
        .f2
        .match_affine(Var::X2)
        .ok_or("f2 not affine in x2")?;
    if a1.coeff.is_zero() {
        return Err("g2 is identically zero".into());
    }
    let parts = Case2Parts {
        g1: a1.offset,
        g2: a1.coeff,
        g3: a2.offset,
        g4: a2.coeff,
    };
    for (name, g) in [("g1", &parts.g1), ("g3", &parts.g3)] {
        let at0 = g.eval(&[0.0, 0.0]).map_err(|e| e.to_string())?;
        if at0.abs() > 1e-12 {
            return Err(format!("{name}(0) != 0"));
        }
    }
    Ok(parts)
}

pub fn extract_case3(sys: &SecondOrderSystem) -> Option<Case3Parts> {
    let m1 = sys.f1.match_affine(Var::X1)?;
    let a = m1.coeff.as_const()?;
    let f = m1.offset;
    if f.is_zero() || f.eval(&[0.0, 0.0]).ok()?.abs() > 1e-12 {
        return None;
    }
    let m2 = sys.f2.match_affine(Var::X1)?;
    let c = m2.coeff.as_const()?;
    let d = m2.offset.proportional_to(&f)?;
    Some(Case3Parts { a, c, d, f })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn sys(f1: &str, f2: &str) -> SecondOrderSystem {
        SecondOrderSystem::new(parse(f1).unwrap(), parse(f2).unwrap(), 1.0, 1.0).unwrap()
    }

    #[test]
    fn classify_examples() {
        let ms = sys("x2", "-x1^3");
        assert_eq!(classify(&ms), vec![CaseTag::CaseIb, CaseTag::CaseII]);
        let c1 = sys("-x1^3 - 2*x1*x2", "x2*sqrt(3*(1 + x2^2))");
        assert_eq!(classify(&c1), vec![CaseTag::CaseI]);
        let uni = sys("sin(x2)", "0");
        assert_eq!(classify(&uni), vec![CaseTag::CaseIII]);
        let none = sys("x1*x2^2 + x2", "x1*x2^2");
        assert!(matches!(classify(&none)[0], CaseTag::Unsupported(_)));
    }

    #[test]
    fn split_examples() {
        let (a, b) = split_f2(&sys("x2^3", "-x1^3 - x1^2*x2")).unwrap();
        assert_eq!((a, b), (parse("-x1^3").unwrap(), parse("-x1^2*x2").unwrap()));
        let (a, b) = split_f2(&sys("x2", "x1 + x2^2")).unwrap();
        assert_eq!((a, b), (parse("x1").unwrap(), parse("x2^2").unwrap()));
        assert!(split_f2(&sys("x2", "cos(x1) - cos(x2)")).is_err());
    }

    #[test]
    fn case3_extraction() {
        let p = extract_case3(&sys("x2", "0")).unwrap();
        assert_eq!((p.a, p.c, p.d), (0.0, 0.0, 0.0));
        let p = extract_case3(&sys("-x1 + sin(x2)", "x1 - sin(x2)")).unwrap();
        assert_eq!((p.a, p.c, p.d), (-1.0, 1.0, -1.0));
        assert!(extract_case3(&sys("x1 + x2", "x1*x2")).is_none());
    }

    #[test]
    fn invariants_enforced() {
        let one = parse("1 + x2").unwrap();
        assert!(SecondOrderSystem::new(one, Expr::zero(), 1.0, 1.0).is_err());
        assert!(SecondOrderSystem::new(Expr::x(2), Expr::zero(), 0.0, 1.0).is_err());
    }
}
