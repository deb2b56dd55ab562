//! Value functions with an optional numeric-integral part.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::expr::{quad_with_tol, Antiderivative, Compiled, Expr, ExprError, Var, QUAD_MAX_SUBDIVISIONS};

/// Absolute tolerance of the integrals inside a [`ValueFunction`]. Tighter
/// than the library default so finite differences of `V` stay clean.
pub const VALUE_QUAD_TOL: f64 = 1e-12;

/// `weight * ∫_0^{x_var} integrand(t) dt`, with `integrand` a function of
/// `var` alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegralTerm {
    pub weight: f64,
    pub integrand: Expr,
    pub var: Var,
}

/// `V(x) = symbolic(x) + Σ weight_i ∫_0^{x_var_i} integrand_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueFunction {
    pub symbolic: Expr,
    pub integrals: Vec<IntegralTerm>,
}

impl ValueFunction {
    pub fn closed(e: Expr) -> ValueFunction {
        ValueFunction {
            symbolic: e,
            integrals: Vec::new(),
        }
    }

    /// Adds `weight * ∫_0^{x_var} integrand`, in closed form when possible.
    ///
    /// # Panics
    /// If `integrand` depends on a variable other than `var`.
    pub fn add_integral(&mut self, weight: f64, integrand: &Expr, var: Var) {
        assert!(
            Var::all(3).all(|w| w == var || !integrand.depends_on(w)),
            "integrand {integrand} must be a function of {var} only"
        );
        if weight == 0.0 || integrand.is_zero() {
            return;
        }
        match integrand.antiderivative(var) {
            Antiderivative::Closed(big) => {
                let at0 = big.eval(&[0.0; 3]).unwrap_or(0.0);
                let piece = Expr::sum(&big, &Expr::constant(-at0)).scale(weight);
                self.symbolic = Expr::sum(&self.symbolic, &piece);
            }
            Antiderivative::NotClosedForm => self.integrals.push(IntegralTerm {
                weight,
                integrand: integrand.clone(),
                var,
            }),
        }
    }

    pub fn is_closed_form(&self) -> bool {
        self.integrals.is_empty()
    }

    pub fn as_expr(&self) -> Option<&Expr> {
        self.is_closed_form().then_some(&self.symbolic)
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64, ExprError> {
        self.compile().eval(x)
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>, ExprError> {
        self.compile().gradient(x)
    }

    pub fn compile(&self) -> CompiledValue {
        let n = 3;
        CompiledValue {
            symbolic: self.symbolic.compile(),
            grad: Var::all(n).map(|v| self.symbolic.diff(v).compile()).collect(),
            integrals: self
                .integrals
                .iter()
                .map(|t| (t.weight, t.integrand.clone(), t.integrand.compile(), t.var))
                .collect(),
        }
    }
}

impl fmt::Display for ValueFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let skip = self.symbolic.is_zero() && !self.integrals.is_empty();
        if !skip {
            write!(f, "{}", self.symbolic)?;
        }
        for (i, t) in self.integrals.iter().enumerate() {
            let sign = if t.weight < 0.0 { "-" } else { "+" };
            let w = t.weight.abs();
            match (i == 0 && skip, t.weight < 0.0) {
                (true, false) => {}
                (true, true) => write!(f, "-")?,
                (false, _) => write!(f, " {sign} ")?,
            }
            write!(f, "{w}*∫_0^{} ({}) d{}", t.var, t.integrand, t.var)?;
        }
        Ok(())
    }
}

/// Pre-compiled evaluator for `V` and `∇V`.
#[derive(Debug, Clone)]
pub struct CompiledValue {
    symbolic: Compiled,
    grad: Vec<Compiled>,
    integrals: Vec<(f64, Expr, Compiled, Var)>,
}

impl CompiledValue {
    pub fn eval(&self, x: &[f64]) -> Result<f64, ExprError> {
        let mut v = self.symbolic.try_eval(x)?;
        for (w, e, _, var) in &self.integrals {
            let hi = x[var.index()];
            v += w * quad_with_tol(e, *var, 0.0, hi, x, VALUE_QUAD_TOL, QUAD_MAX_SUBDIVISIONS)?;
        }
        Ok(v)
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>, ExprError> {
        let mut g = Vec::with_capacity(x.len());
        for c in &self.grad[..x.len()] {
            g.push(c.try_eval(x)?);
        }
        for (w, _, c, var) in &self.integrals {
            g[var.index()] += w * c.try_eval(x)?;
        }
        Ok(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    #[test]
    fn closed_and_numeric_parts_agree() {
        let mut v = ValueFunction::closed(Expr::zero());
        v.add_integral(2.0, &parse("x2*sqrt(1 + x2^2)").unwrap(), Var::X2);
        v.add_integral(1.0, &parse("x1").unwrap(), Var::X1);
        assert_eq!(v.integrals.len(), 1);
        assert_eq!(v.symbolic, parse("0.5*x1^2").unwrap());
        let x = [0.7, 1.0];
        let exact = 2.0 * (2f64.powf(1.5) - 1.0) / 3.0 + 0.5 * 0.49;
        assert!((v.eval(&x).unwrap() - exact).abs() < 1e-11);
        let g = v.gradient(&x).unwrap();
        assert!((g[0] - 0.7).abs() < 1e-14);
        assert!((g[1] - 2.0 * 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn origin_constant_is_removed() {
        let mut v = ValueFunction::closed(Expr::zero());
        v.add_integral(2.0, &parse("sin(x2)").unwrap(), Var::X2);
        assert_eq!(v.symbolic, parse("2 - 2*cos(x2)").unwrap());
    }
}
