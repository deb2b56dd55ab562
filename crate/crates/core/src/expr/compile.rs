//! Flat postfix form of an expression for fast repeated evaluation.

use super::{sign_value, Expr, ExprError};

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Const(f64),
    Var(usize),
    Add(usize),
    Mul(usize),
    Powi(i32),
    /// `sqrt(top)^halves`
    PowHalf(i32),
    Sin,
    Cos,
    Sign,
    Abs,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Compiled {
    ops: Vec<Op>,
    depth: usize,
    arity: usize,
}

impl Compiled {
    pub fn new(e: &Expr) -> Compiled {
        let mut ops = Vec::new();
        emit(e, &mut ops);
        let mut depth = 0usize;
        let mut max = 0usize;
        for op in &ops {
            match op {
                Op::Const(_) | Op::Var(_) => depth += 1,
                Op::Add(n) | Op::Mul(n) => depth -= n - 1,
                _ => {}
            }
            max = max.max(depth);
        }
        Compiled {
            ops,
            depth: max,
            arity: e.arity(),
        }
    }

    /// Number of state coordinates the expression reads.
    pub fn arity(&self) -> usize {
        self.arity
    }

    /// Evaluates at `x`; domain violations yield NaN or infinities.
    ///
    /// # Panics
    /// If `x` is shorter than [`Compiled::arity`].
    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut stack: Vec<f64> = Vec::with_capacity(self.depth);
        for op in &self.ops {
            match *op {
                Op::Const(c) => stack.push(c),
                Op::Var(i) => stack.push(x[i]),
                Op::Add(n) => {
                    let at = stack.len() - n;
                    let s: f64 = stack[at..].iter().sum();
                    stack.truncate(at);
                    stack.push(s);
                }
                Op::Mul(n) => {
                    let at = stack.len() - n;
                    let p: f64 = stack[at..].iter().product();
                    stack.truncate(at);
                    stack.push(p);
                }
                Op::Powi(n) => {
                    let top = stack.last_mut().unwrap();
                    *top = top.powi(n);
                }
                Op::PowHalf(h) => {
                    let top = stack.last_mut().unwrap();
                    *top = top.sqrt().powi(h);
                }
                Op::Sin => {
                    let top = stack.last_mut().unwrap();
                    *top = top.sin();
                }
                Op::Cos => {
                    let top = stack.last_mut().unwrap();
                    *top = top.cos();
                }
                Op::Sign => {
                    let top = stack.last_mut().unwrap();
                    *top = sign_value(*top);
                }
                Op::Abs => {
                    let top = stack.last_mut().unwrap();
                    *top = top.abs();
                }
            }
        }
        stack.pop().unwrap_or(0.0)
    }

    /// Like [`Compiled::eval`] but reports short inputs and non-finite results.
    pub fn try_eval(&self, x: &[f64]) -> Result<f64, ExprError> {
        if x.len() < self.arity {
            return Err(ExprError::Domain(format!(
                "expression reads x{} but the state has {} coordinates",
                self.arity,
                x.len()
            )));
        }
        let v = self.eval(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(ExprError::Domain(format!("non-finite value at {x:?}")))
        }
    }
}

fn emit(e: &Expr, ops: &mut Vec<Op>) {
    match e {
        Expr::Const(c) => ops.push(Op::Const(*c)),
        Expr::Var(v) => ops.push(Op::Var(v.index())),
        Expr::Add(xs) | Expr::Mul(xs) => {
            for x in xs {
                emit(x, ops);
            }
            ops.push(if matches!(e, Expr::Add(_)) {
                Op::Add(xs.len())
            } else {
                Op::Mul(xs.len())
            });
        }
        Expr::Pow(b, k) => {
            emit(b, ops);
            ops.push(match k.as_int() {
                Some(n) => Op::Powi(n),
                None => Op::PowHalf(k.half_units()),
            });
        }
        Expr::Sin(a) => {
            emit(a, ops);
            ops.push(Op::Sin);
        }
        Expr::Cos(a) => {
            emit(a, ops);
            ops.push(Op::Cos);
        }
        Expr::Sign(a) => {
            emit(a, ops);
            ops.push(Op::Sign);
        }
        Expr::Abs(a) => {
            emit(a, ops);
            ops.push(Op::Abs);
        }
    }
}

#[cfg(test)]
mod tests {
    use crate::expr::parse;

    #[test]
    fn agrees_with_tree_walk() {
        let e = parse("x1^2*sin(x2) - sqrt(1 + x3^2)/x1 + sign(x2)*abs(x3)^3").unwrap();
        let c = e.compile();
        assert_eq!(c.arity(), 3);
        for x in [[1.0, 2.0, 3.0], [-0.5, 0.0, 0.25], [2.0, -1.0, -4.0]] {
            assert_eq!(c.eval(&x), e.eval(&x).unwrap());
        }
    }

    #[test]
    fn domain_violation_is_reported() {
        let c = parse("sqrt(x1)").unwrap().compile();
        assert!(c.try_eval(&[-1.0]).is_err());
        assert!(c.try_eval(&[]).is_err());
        assert_eq!(c.try_eval(&[9.0]).unwrap(), 3.0);
    }
}
