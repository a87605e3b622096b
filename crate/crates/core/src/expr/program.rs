//! Flat postfix form of an [`Expr`], used on the training hot path.
//!
//! Each instruction writes one slot and reads earlier slots only, so a forward
//! sweep fills every intermediate value and a single reverse sweep over the
//! same slots accumulates the gradient of the output.

use super::ast::{divide, finite, int_pow, real_pow, Exponent, Expr, Func};
use crate::error::DomainKind;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Const(f64),
    Var(usize),
    Time,
    Neg(usize),
    Func(Func, usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    PowInt(usize, i32),
    PowReal(usize, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    ops: Vec<Op>,
}

/// Reusable scratch buffers for [`Program`] sweeps.
#[derive(Debug, Default, Clone)]
pub struct Scratch {
    vals: Vec<f64>,
    adj: Vec<f64>,
}

impl Program {
    pub fn compile(expr: &Expr) -> Self {
        let mut ops = Vec::new();
        emit(expr, &mut ops);
        Self { ops }
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    fn forward(&self, vars: &[f64], time: f64, vals: &mut Vec<f64>) -> Result<f64, DomainKind> {
        vals.clear();
        for op in &self.ops {
            let v = match *op {
                Op::Const(c) => c,
                Op::Var(i) => vars[i],
                Op::Time => time,
                Op::Neg(a) => -vals[a],
                Op::Func(f, a) => f.apply(vals[a])?,
                Op::Add(a, b) => finite(vals[a] + vals[b])?,
                Op::Sub(a, b) => finite(vals[a] - vals[b])?,
                Op::Mul(a, b) => finite(vals[a] * vals[b])?,
                Op::Div(a, b) => divide(vals[a], vals[b])?,
                Op::PowInt(a, n) => int_pow(vals[a], n)?,
                Op::PowReal(a, p) => real_pow(vals[a], p)?,
            };
            vals.push(v);
        }
        Ok(*vals.last().expect("compiled program is never empty"))
    }

    pub fn eval(&self, vars: &[f64], time: f64, scratch: &mut Scratch) -> Result<f64, DomainKind> {
        self.forward(vars, time, &mut scratch.vals)
    }

    /// Evaluates the program and adds `seed * ∇_vars` of its value into `grad`.
    pub fn eval_accumulate_grad(
        &self,
        vars: &[f64],
        time: f64,
        seed: f64,
        grad: &mut [f64],
        scratch: &mut Scratch,
    ) -> Result<f64, DomainKind> {
        let value = self.forward(vars, time, &mut scratch.vals)?;
        self.reverse(seed, grad, scratch)?;
        Ok(value)
    }

    /// Like [`eval_accumulate_grad`](Self::eval_accumulate_grad), with the seed
    /// computed from the program value.
    pub fn eval_then_grad(
        &self,
        vars: &[f64],
        time: f64,
        seed: impl FnOnce(f64) -> f64,
        grad: &mut [f64],
        scratch: &mut Scratch,
    ) -> Result<f64, DomainKind> {
        let value = self.forward(vars, time, &mut scratch.vals)?;
        self.reverse(seed(value), grad, scratch)?;
        Ok(value)
    }

    /// Gradient accumulation reusing the values left by the preceding forward sweep.
    fn reverse(&self, seed: f64, grad: &mut [f64], scratch: &mut Scratch) -> Result<(), DomainKind> {
        let Scratch { vals, adj } = scratch;
        adj.clear();
        adj.resize(self.ops.len(), 0.0);
        *adj.last_mut().expect("compiled program is never empty") = seed;
        for (k, op) in self.ops.iter().enumerate().rev() {
            let g = adj[k];
            if g == 0.0 {
                continue;
            }
            match *op {
                Op::Const(_) | Op::Time => {}
                Op::Var(i) => grad[i] += g,
                Op::Neg(a) => adj[a] -= g,
                Op::Func(f, a) => adj[a] += g * f.derivative(vals[a], vals[k])?,
                Op::Add(a, b) => {
                    adj[a] += g;
                    adj[b] += g;
                }
                Op::Sub(a, b) => {
                    adj[a] += g;
                    adj[b] -= g;
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (vals[a], vals[b]);
                    adj[a] += g * vb;
                    adj[b] += g * va;
                }
                Op::Div(a, b) => {
                    let vb = vals[b];
                    adj[a] += g / vb;
                    adj[b] -= g * vals[k] / vb;
                }
                Op::PowInt(a, n) => {
                    if n != 0 {
                        adj[a] += g * n as f64 * int_pow(vals[a], n - 1)?;
                    }
                }
                Op::PowReal(a, p) => adj[a] += g * p * real_pow(vals[a], p - 1.0)?,
            }
        }
        if grad.iter().all(|g| g.is_finite()) {
            Ok(())
        } else {
            Err(DomainKind::NonFinite)
        }
    }
}

fn emit(expr: &Expr, ops: &mut Vec<Op>) -> usize {
    let op = match expr {
        Expr::Const(c) => Op::Const(*c),
        Expr::Var(i) => Op::Var(*i),
        Expr::Time => Op::Time,
        Expr::Neg(a) => Op::Neg(emit(a, ops)),
        Expr::Func(f, a) => Op::Func(*f, emit(a, ops)),
        Expr::Add(a, b) => {
            let (a, b) = (emit(a, ops), emit(b, ops));
            Op::Add(a, b)
        }
        Expr::Sub(a, b) => {
            let (a, b) = (emit(a, ops), emit(b, ops));
            Op::Sub(a, b)
        }
        Expr::Mul(a, b) => {
            let (a, b) = (emit(a, ops), emit(b, ops));
            Op::Mul(a, b)
        }
        Expr::Div(a, b) => {
            let (a, b) = (emit(a, ops), emit(b, ops));
            Op::Div(a, b)
        }
        Expr::Pow(a, Exponent::Int(n)) => Op::PowInt(emit(a, ops), *n),
        Expr::Pow(a, Exponent::Real(p)) => Op::PowReal(emit(a, ops), *p),
    };
    ops.push(op);
    ops.len() - 1
}
