//! The homotopy `H(x, t) = t F(x) + γ (t − 1)(F(x) − F(x0))` over a base system.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, EvalError, Result};
use crate::expr::System;

pub const DEFAULT_GAMMA: f64 = 0.01;

/// Relative singular-value cutoff below which `D_x H` counts as singular.
pub const SINGULAR_RTOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct HomotopyProblem {
    base: System,
    x0: Vec<f64>,
    gamma: f64,
    f_x0: Vec<f64>,
}

impl HomotopyProblem {
    /// Fails with [`Error::InadmissibleAnchor`] when `F(x0)` is undefined.
    pub fn new(base: System, x0: Vec<f64>, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::Config(format!("gamma must be positive, got {gamma}")));
        }
        if base.time().is_some() {
            return Err(Error::Config(
                "a time-varying system cannot be embedded in a homotopy".into(),
            ));
        }
        if x0.len() != base.dim() {
            return Err(Error::Config(format!(
                "anchor has {} coordinates, system has {} variables",
                x0.len(),
                base.dim()
            )));
        }
        let f_x0 = base.eval(&x0).map_err(Error::InadmissibleAnchor)?;
        Ok(Self {
            base,
            x0,
            gamma,
            f_x0,
        })
    }

    pub fn base(&self) -> &System {
        &self.base
    }

    pub fn x0(&self) -> &[f64] {
        &self.x0
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn f_x0(&self) -> &[f64] {
        &self.f_x0
    }

    /// `t + γ(t − 1)`, the factor multiplying `F(x)`.
    pub fn coefficient(&self, t: f64) -> f64 {
        t + self.gamma * (t - 1.0)
    }

    /// The `x`-independent part of `h_i`: `−γ(t − 1) f_i(x0)`.
    pub fn offset(&self, i: usize, t: f64) -> f64 {
        -self.gamma * (t - 1.0) * self.f_x0[i]
    }

    pub(crate) fn combine(&self, i: usize, t: f64, fx: f64) -> f64 {
        if t == 1.0 {
            return fx;
        }
        self.coefficient(t) * fx + self.offset(i, t)
    }

    pub fn eval(&self, x: &[f64], t: f64) -> Result<Vec<f64>, EvalError> {
        let f = self.base.eval(x)?;
        Ok(f
            .into_iter()
            .enumerate()
            .map(|(i, fx)| self.combine(i, t, fx))
            .collect())
    }

    /// `∂H/∂t = F(x) + γ (F(x) − F(x0))`.
    pub fn dt(&self, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        let f = self.base.eval(x)?;
        Ok(f.iter()
            .zip(&self.f_x0)
            .map(|(fx, f0)| fx + self.gamma * (fx - f0))
            .collect())
    }

    /// `∂H/∂x = (t + γ(t − 1)) J_F(x)`.
    pub fn dx(&self, x: &[f64], t: f64) -> Result<DMatrix<f64>, EvalError> {
        Ok(self.base.jacobian(x)? * self.coefficient(t))
    }

    pub fn diagnostic(&self, x: &[f64], t: f64) -> Result<Diagnostic, EvalError> {
        let dx_h = self.dx(x, t)?;
        let dt_h = DVector::from_vec(self.dt(x)?);
        let sv = dx_h.clone().singular_values();
        let sigma_max = sv.max();
        let sigma_min = sv.min();
        let singular = !(sigma_max > 0.0) || sigma_min < SINGULAR_RTOL * sigma_max;
        let condition = if singular {
            f64::INFINITY
        } else {
            dx_h.clone()
                .lu()
                .solve(&dt_h)
                .map_or(f64::INFINITY, |v| v.norm())
        };
        Ok(Diagnostic {
            t,
            dx_h,
            dt_h,
            sigma_min,
            sigma_max,
            condition,
        })
    }
}

/// Path-existence quantities at one `(x, t)`.
#[derive(Debug, Clone)]
pub struct Diagnostic {
    pub t: f64,
    pub dx_h: DMatrix<f64>,
    pub dt_h: DVector<f64>,
    pub sigma_min: f64,
    pub sigma_max: f64,
    /// `‖(D_x H)⁻¹ D_t H‖`, infinite when `D_x H` is numerically singular.
    pub condition: f64,
}

impl Diagnostic {
    pub fn is_singular(&self) -> bool {
        self.condition.is_infinite()
    }
}
