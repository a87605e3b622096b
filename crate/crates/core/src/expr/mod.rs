//! Scalar expressions and square systems of equations over named variables.
//!
//! Systems are written in a small line-oriented language (see `docs/dsl.md`),
//! evaluated pointwise with explicit domain errors, and differentiated exactly:
//! forward mode over the tree for Jacobians, reverse mode over a compiled
//! postfix program for vector-Jacobian products during training.

mod ast;
mod parse;
mod program;
mod system;

pub use ast::{Exponent, Expr, ExprDisplay, Func};
pub use parse::{parse_system, DEFAULT_DOMAIN};
pub use program::{Program, Scratch};
pub use system::{is_domain_violation, Interval, System, TimeAxis};
