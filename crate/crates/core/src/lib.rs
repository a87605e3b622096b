//! Solving nonlinear algebraic systems by training a small network along a
//! homotopy path.
//!
//! A [`System`] is embedded in the homotopy
//! `H(x, t) = t F(x) + γ (t − 1)(F(x) − F(x0))`, and a network `x̂(Θ; t)` is
//! trained so that `x̂(0) = x0` and `H(x̂(t), t) ≈ 0` on sampled `t ∈ [0, 1]`.
//! The prediction `x̂(1)` approximates a root of `F`.

pub mod autodiff;
pub mod bench;
pub mod error;
pub mod expr;
pub mod hann;
pub mod homotopy;
pub mod net;
pub mod report;
pub mod sampling;
pub mod timevarying;
pub mod train;

pub use error::{Error, Result};
pub use expr::{parse_system, Interval, System};
pub use homotopy::HomotopyProblem;
pub use net::{Architecture, NetworkParams};
pub use train::{LossSpec, LossWeights, OptimizerConfig, OptimizerKind, TrainingHistory};
