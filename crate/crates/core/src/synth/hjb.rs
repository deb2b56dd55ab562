//! Hamiltonian evaluation for a synthesized result.

use super::{CompiledValue, SynthesisResult};
use crate::expr::{Compiled, ExprError};
use crate::model::System;

/// Compiled `H(x, u, ∇V) = L_state + r u^2 + ∇V · (drift + b u e_n)`.
#[derive(Debug, Clone)]
pub struct HjbEvaluator {
    drift: Vec<Compiled>,
    b: f64,
    r: f64,
    u: Compiled,
    l_state: Compiled,
    value: CompiledValue,
}

impl HjbEvaluator {
    pub fn new(sys: &System, result: &SynthesisResult) -> HjbEvaluator {
        HjbEvaluator {
            drift: sys.drift().iter().map(|e| e.compile()).collect(),
            b: sys.b(),
            r: sys.r(),
            u: result.u.compile(),
            l_state: result.l_state.compile(),
            value: result.value.compile(),
        }
    }

    pub fn control(&self, x: &[f64]) -> Result<f64, ExprError> {
        self.u.try_eval(x)
    }

    pub fn state_cost(&self, x: &[f64]) -> Result<f64, ExprError> {
        self.l_state.try_eval(x)
    }

    pub fn value(&self) -> &CompiledValue {
        &self.value
    }

    /// `H` at an arbitrary input `u`.
    pub fn hamiltonian(&self, x: &[f64], u: f64) -> Result<f64, ExprError> {
        let grad = self.value.gradient(x)?;
        self.hamiltonian_with(x, u, &grad)
    }

    fn hamiltonian_with(&self, x: &[f64], u: f64, grad: &[f64]) -> Result<f64, ExprError> {
        let mut h = self.l_state.try_eval(x)? + self.r * u * u;
        for (g, f) in grad.iter().zip(&self.drift) {
            h += g * f.try_eval(x)?;
        }
        h += grad[grad.len() - 1] * self.b * u;
        Ok(h)
    }

    /// `H(x, u(x), ∇V(x))`, zero for an exact solution.
    pub fn residual(&self, x: &[f64]) -> Result<f64, ExprError> {
        let u = self.u.try_eval(x)?;
        let grad = self.value.gradient(x)?;
        self.hamiltonian_with(x, u, &grad)
    }

    /// `V_{x_n} + 2 r u / b`, zero when `u` minimizes the Hamiltonian.
    pub fn stationarity(&self, x: &[f64]) -> Result<f64, ExprError> {
        let u = self.u.try_eval(x)?;
        let grad = self.value.gradient(x)?;
        Ok(grad[grad.len() - 1] + 2.0 * self.r * u / self.b)
    }
}

/// One-off residual; build an [`HjbEvaluator`] for repeated use.
pub fn hjb_residual(result: &SynthesisResult, sys: &System, x: &[f64]) -> Result<f64, ExprError> {
    HjbEvaluator::new(sys, result).residual(x)
}
