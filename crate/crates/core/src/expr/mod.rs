//! Symbolic scalar expressions over the state variables `x1`, `x2`, `x3`.
//!
//! Every [`Expr`] produced by the public constructors and by [`parse`] is in
//! canonical form:
//!
//! * sums and products are flattened and their operands sorted,
//! * constants are folded and like terms / like factors are merged,
//! * products are distributed over sums and small integer powers of sums are
//!   expanded, so polynomial identities reduce to structural equality,
//! * `sqrt(e)` is stored as `e^(1/2)`; exponents are multiples of one half.
//!
//! Structural equality of canonical forms is therefore a decision procedure
//! for polynomial identities in the atoms (variables, `sin`, `cos`, `sign`,
//! `abs`, and non-integer powers of sums). Trigonometric identities are not
//! applied.

mod calculus;
mod canon;
mod compile;
mod parse;
mod pattern;
mod print;
mod quad;

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub use calculus::Antiderivative;
pub use compile::Compiled;
pub use parse::parse;
pub use pattern::Affine;
pub use quad::{quad, quad_with_tol, QUAD_MAX_SUBDIVISIONS, QUAD_TOL};

/// Maximum number of state variables.
pub const MAX_VARS: usize = 3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at offset {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown identifier `{name}` at offset {pos}")]
    UnknownIdentifier { pos: usize, name: String },
    #[error("disallowed function `{name}` at offset {pos}")]
    DisallowedFunction { pos: usize, name: String },
    #[error("disallowed exponent `{text}` at offset {pos} (only integers and halves are allowed)")]
    DisallowedExponent { pos: usize, text: String },
    #[error("domain violation: {0}")]
    Domain(String),
    #[error("non-differentiable node `{node}` depends on {var}")]
    NonDifferentiable { node: String, var: Var },
    #[error("quadrature did not reach tolerance {tol:e} within {max} subdivisions")]
    QuadratureFailed { tol: f64, max: usize },
}

/// A state variable, stored 0-based and displayed 1-based (`x1`, `x2`, `x3`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(u8);

impl Var {
    pub const X1: Var = Var(0);
    pub const X2: Var = Var(1);
    pub const X3: Var = Var(2);

    /// Variable from its 1-based number, e.g. `Var::numbered(2) == Var::X2`.
    pub fn numbered(n: usize) -> Option<Var> {
        (1..=MAX_VARS).contains(&n).then(|| Var((n - 1) as u8))
    }

    pub fn from_index(i: usize) -> Var {
        assert!(i < MAX_VARS, "state index {i} out of range");
        Var(i as u8)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn all(n: usize) -> impl Iterator<Item = Var> {
        (0..n).map(Var::from_index)
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x{}", self.0 + 1)
    }
}

/// An exponent that is an integer multiple of one half.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Exponent(i32);

impl Exponent {
    pub const ZERO: Exponent = Exponent(0);
    pub const ONE: Exponent = Exponent(2);
    pub const HALF: Exponent = Exponent(1);

    pub fn int(n: i32) -> Exponent {
        Exponent(2 * n)
    }

    /// `halves / 2`.
    pub fn halves(halves: i32) -> Exponent {
        Exponent(halves)
    }

    pub fn half_units(self) -> i32 {
        self.0
    }

    pub fn is_integer(self) -> bool {
        self.0 % 2 == 0
    }

    pub fn as_int(self) -> Option<i32> {
        self.is_integer().then_some(self.0 / 2)
    }

    pub fn value(self) -> f64 {
        f64::from(self.0) / 2.0
    }

    pub fn is_negative(self) -> bool {
        self.0 < 0
    }

    /// Product of two exponents, if it is again a multiple of one half.
    pub fn checked_mul(self, other: Exponent) -> Option<Exponent> {
        let num = self.0 * other.0;
        (num % 2 == 0).then_some(Exponent(num / 2))
    }
}

impl std::ops::Neg for Exponent {
    type Output = Exponent;

    fn neg(self) -> Exponent {
        Exponent(-self.0)
    }
}

impl std::ops::Add for Exponent {
    type Output = Exponent;

    fn add(self, other: Exponent) -> Exponent {
        Exponent(self.0 + other.0)
    }
}

/// A node of the expression tree. Build values through the associated
/// constructors ([`Expr::add`], [`Expr::mul`], ...) to keep them canonical.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(Var),
    Add(Vec<Expr>),
    Mul(Vec<Expr>),
    Pow(Box<Expr>, Exponent),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Sign(Box<Expr>),
    Abs(Box<Expr>),
}

impl Expr {
    pub fn zero() -> Expr {
        Expr::Const(0.0)
    }

    pub fn one() -> Expr {
        Expr::Const(1.0)
    }

    pub fn constant(c: f64) -> Expr {
        Expr::Const(normalize_zero(c))
    }

    pub fn var(v: Var) -> Expr {
        Expr::Var(v)
    }

    pub fn x(n: usize) -> Expr {
        Expr::Var(Var::numbered(n).expect("variable number must be 1..=3"))
    }

    pub fn add(terms: Vec<Expr>) -> Expr {
        canon::add(terms)
    }

    pub fn mul(factors: Vec<Expr>) -> Expr {
        canon::mul(factors)
    }

    pub fn sum(a: &Expr, b: &Expr) -> Expr {
        canon::add(vec![a.clone(), b.clone()])
    }

    pub fn sub(a: &Expr, b: &Expr) -> Expr {
        canon::add(vec![a.clone(), b.scale(-1.0)])
    }

    pub fn product(a: &Expr, b: &Expr) -> Expr {
        canon::mul(vec![a.clone(), b.clone()])
    }

    pub fn div(a: &Expr, b: &Expr) -> Expr {
        canon::mul(vec![a.clone(), canon::pow(b.clone(), Exponent::int(-1))])
    }

    pub fn scale(&self, c: f64) -> Expr {
        canon::mul(vec![Expr::Const(c), self.clone()])
    }

    pub fn neg(&self) -> Expr {
        self.scale(-1.0)
    }

    pub fn pow(&self, e: Exponent) -> Expr {
        canon::pow(self.clone(), e)
    }

    pub fn powi(&self, n: i32) -> Expr {
        canon::pow(self.clone(), Exponent::int(n))
    }

    pub fn sqrt(&self) -> Expr {
        canon::pow(self.clone(), Exponent::HALF)
    }

    pub fn sin(&self) -> Expr {
        canon::sin(self.clone())
    }

    pub fn cos(&self) -> Expr {
        canon::cos(self.clone())
    }

    pub fn sign(&self) -> Expr {
        canon::sign(self.clone())
    }

    pub fn abs(&self) -> Expr {
        canon::abs(self.clone())
    }

    /// Re-canonicalizes a tree that may have been assembled by hand.
    pub fn canonical(&self) -> Expr {
        canon::canonicalize(self)
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Const(c) if *c == 0.0)
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn depends_on(&self, v: Var) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Var(w) => *w == v,
            Expr::Add(xs) | Expr::Mul(xs) => xs.iter().any(|x| x.depends_on(v)),
            Expr::Pow(b, _) => b.depends_on(v),
            Expr::Sin(a) | Expr::Cos(a) | Expr::Sign(a) | Expr::Abs(a) => a.depends_on(v),
        }
    }

    /// Largest variable index referenced plus one (0 for constants).
    pub fn arity(&self) -> usize {
        (0..MAX_VARS)
            .rev()
            .find(|&i| self.depends_on(Var::from_index(i)))
            .map_or(0, |i| i + 1)
    }

    /// True when the tree contains a `sign` node.
    pub fn has_sign(&self) -> bool {
        self.any_node(&|e| matches!(e, Expr::Sign(_)))
    }

    /// True when the tree contains a `sign` or `abs` node.
    pub fn has_nonsmooth(&self) -> bool {
        self.any_node(&|e| matches!(e, Expr::Sign(_) | Expr::Abs(_)))
    }

    fn any_node(&self, pred: &dyn Fn(&Expr) -> bool) -> bool {
        if pred(self) {
            return true;
        }
        match self {
            Expr::Const(_) | Expr::Var(_) => false,
            Expr::Add(xs) | Expr::Mul(xs) => xs.iter().any(|x| x.any_node(pred)),
            Expr::Pow(b, _) => b.any_node(pred),
            Expr::Sin(a) | Expr::Cos(a) | Expr::Sign(a) | Expr::Abs(a) => a.any_node(pred),
        }
    }

    /// Substitutes `v := value` and re-canonicalizes.
    pub fn substitute(&self, v: Var, value: &Expr) -> Expr {
        match self {
            Expr::Const(c) => Expr::Const(*c),
            Expr::Var(w) if *w == v => value.clone(),
            Expr::Var(w) => Expr::Var(*w),
            Expr::Add(xs) => canon::add(xs.iter().map(|x| x.substitute(v, value)).collect()),
            Expr::Mul(xs) => canon::mul(xs.iter().map(|x| x.substitute(v, value)).collect()),
            Expr::Pow(b, e) => canon::pow(b.substitute(v, value), *e),
            Expr::Sin(a) => canon::sin(a.substitute(v, value)),
            Expr::Cos(a) => canon::cos(a.substitute(v, value)),
            Expr::Sign(a) => canon::sign(a.substitute(v, value)),
            Expr::Abs(a) => canon::abs(a.substitute(v, value)),
        }
    }

    /// Evaluates the tree at `x`. Missing coordinates are an error.
    pub fn eval(&self, x: &[f64]) -> Result<f64, ExprError> {
        Ok(match self {
            Expr::Const(c) => *c,
            Expr::Var(v) => *x.get(v.index()).ok_or_else(|| {
                ExprError::Domain(format!("{v} is not part of a {}-dimensional state", x.len()))
            })?,
            Expr::Add(xs) => {
                let mut s = 0.0;
                for t in xs {
                    s += t.eval(x)?;
                }
                s
            }
            Expr::Mul(xs) => {
                let mut p = 1.0;
                for t in xs {
                    p *= t.eval(x)?;
                }
                p
            }
            Expr::Pow(b, e) => {
                let base = b.eval(x)?;
                pow_value(base, *e).ok_or_else(|| {
                    ExprError::Domain(format!("({}) = {base} raised to {}", b, e.value()))
                })?
            }
            Expr::Sin(a) => a.eval(x)?.sin(),
            Expr::Cos(a) => a.eval(x)?.cos(),
            Expr::Sign(a) => sign_value(a.eval(x)?),
            Expr::Abs(a) => a.eval(x)?.abs(),
        })
    }

    /// Symbolic partial derivative. `abs` differentiates to `sign` and `sign`
    /// to zero, which is valid away from the zero set of their arguments;
    /// use [`Expr::diff_checked`] to reject those nodes instead.
    pub fn diff(&self, v: Var) -> Expr {
        calculus::diff(self, v)
    }

    /// Like [`Expr::diff`] but fails when a `sign`/`abs` node depends on `v`.
    pub fn diff_checked(&self, v: Var) -> Result<Expr, ExprError> {
        calculus::diff_checked(self, v)
    }

    /// Closed-form antiderivative in `v`, if `self` lies in the supported
    /// subclass (polynomials, `sin`/`cos` of arguments linear in `v`, and
    /// their products with powers of `v`).
    pub fn antiderivative(&self, v: Var) -> Antiderivative {
        calculus::antiderivative(self, v)
    }

    /// Splits `self` as `offset + coeff * v` with `coeff`, `offset` free of `v`.
    pub fn match_affine(&self, v: Var) -> Option<Affine> {
        pattern::match_affine(self, v)
    }

    /// `(coefficient, monomial)` decomposition of every term of the sum.
    pub fn terms(&self) -> Vec<(f64, Expr)> {
        pattern::terms(self)
    }

    /// Returns `d` such that `self == d * other`, if the two canonical forms
    /// are proportional with a constant factor.
    pub fn proportional_to(&self, other: &Expr) -> Option<f64> {
        pattern::proportional(self, other)
    }

    /// Divides out `v^2` from every term, if each term carries it.
    pub fn divide_by_square(&self, v: Var) -> Option<Expr> {
        pattern::divide_by_square(self, v)
    }

    /// True when every term is a non-negative constant times a product of
    /// even powers, so the expression is non-negative everywhere it is defined.
    pub fn is_manifestly_nonnegative(&self) -> bool {
        pattern::manifestly_nonnegative(self)
    }

    pub fn compile(&self) -> Compiled {
        Compiled::new(self)
    }

    /// Structural equality with a relative tolerance on constants.
    pub fn approx_eq(&self, other: &Expr, rel_tol: f64) -> bool {
        canon::approx_eq(self, other, rel_tol)
    }

    fn rank(&self) -> u8 {
        match self {
            Expr::Const(_) => 0,
            Expr::Var(_) => 1,
            Expr::Pow(..) => 2,
            Expr::Mul(_) => 3,
            Expr::Add(_) => 4,
            Expr::Sin(_) => 5,
            Expr::Cos(_) => 6,
            Expr::Sign(_) => 7,
            Expr::Abs(_) => 8,
        }
    }
}

/// Total structural order used to sort operands of sums and products.
pub fn cmp_expr(a: &Expr, b: &Expr) -> Ordering {
    match (a, b) {
        (Expr::Const(x), Expr::Const(y)) => x.total_cmp(y),
        (Expr::Var(x), Expr::Var(y)) => x.cmp(y),
        (Expr::Add(xs), Expr::Add(ys)) | (Expr::Mul(xs), Expr::Mul(ys)) => cmp_slices(xs, ys),
        (Expr::Pow(b1, e1), Expr::Pow(b2, e2)) => cmp_expr(b1, b2).then(e1.cmp(e2)),
        (Expr::Sin(x), Expr::Sin(y))
        | (Expr::Cos(x), Expr::Cos(y))
        | (Expr::Sign(x), Expr::Sign(y))
        | (Expr::Abs(x), Expr::Abs(y)) => cmp_expr(x, y),
        _ => a.rank().cmp(&b.rank()),
    }
}

fn cmp_slices(xs: &[Expr], ys: &[Expr]) -> Ordering {
    for (x, y) in xs.iter().zip(ys) {
        let o = cmp_expr(x, y);
        if o != Ordering::Equal {
            return o;
        }
    }
    xs.len().cmp(&ys.len())
}

pub(crate) fn normalize_zero(c: f64) -> f64 {
    if c == 0.0 {
        0.0
    } else {
        c
    }
}

/// `sign(0) = 0`.
pub(crate) fn sign_value(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

pub(crate) fn pow_value(base: f64, e: Exponent) -> Option<f64> {
    if let Some(n) = e.as_int() {
        if base == 0.0 && n < 0 {
            return None;
        }
        return Some(base.powi(n));
    }
    if base < 0.0 || (base == 0.0 && e.is_negative()) {
        return None;
    }
    Some(base.sqrt().powi(e.half_units()))
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print::to_string(self))
    }
}

impl std::str::FromStr for Expr {
    type Err = ExprError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

impl Serialize for Var {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Var {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.strip_prefix('x')
            .and_then(|n| n.parse().ok())
            .and_then(Var::numbered)
            .ok_or_else(|| serde::de::Error::custom(format!("unknown state variable `{text}`")))
    }
}

impl Serialize for Expr {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Expr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        parse(&text).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_examples() {
        let e = parse("x1^2 + x2").unwrap();
        assert_eq!(e.eval(&[2.0, 3.0]).unwrap(), 7.0);
        assert_eq!(parse("sin(x2)").unwrap().eval(&[0.0, 0.0]).unwrap(), 0.0);
        let e = parse("x2*sqrt(3*(1 + x2^2))").unwrap();
        assert!((e.eval(&[0.0, 1.0]).unwrap() - 6f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn eval_domain_violation() {
        let e = parse("sqrt(x1)").unwrap();
        assert!(matches!(e.eval(&[-1.0]), Err(ExprError::Domain(_))));
        assert!(e.eval(&[4.0]).unwrap() == 2.0);
    }

    #[test]
    fn sign_of_zero_is_zero() {
        let e = parse("sign(x1)").unwrap();
        assert_eq!(e.eval(&[0.0]).unwrap(), 0.0);
        assert_eq!(e.eval(&[-0.5]).unwrap(), -1.0);
    }

    #[test]
    fn arity_and_dependence() {
        let e = parse("x1 + sin(x3)").unwrap();
        assert!(e.depends_on(Var::X3));
        assert!(!e.depends_on(Var::X2));
        assert_eq!(e.arity(), 3);
        assert_eq!(Expr::constant(2.0).arity(), 0);
    }

    #[test]
    fn substitution() {
        let e = parse("x1^2 + x1*x2").unwrap();
        let s = e.substitute(Var::X2, &Expr::zero());
        assert_eq!(s, parse("x1^2").unwrap());
    }
}
