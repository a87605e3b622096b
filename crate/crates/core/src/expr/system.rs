use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::ast::Expr;
use super::program::{Program, Scratch};
use crate::error::{DomainKind, EvalError};

/// Closed interval `[lo, hi]` with `lo < hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Option<Self> {
        (lo < hi && lo.is_finite() && hi.is_finite()).then_some(Self { lo, hi })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

/// The reserved time symbol of a time-varying system and its interval.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeAxis {
    pub name: String,
    pub interval: Interval,
}

/// `n` equations `f_i(x) = 0` over named variables and a rectangular domain.
#[derive(Debug, Clone)]
pub struct System {
    equations: Vec<Expr>,
    variables: Vec<String>,
    domain: Vec<Interval>,
    time: Option<TimeAxis>,
    programs: Vec<Program>,
}

impl PartialEq for System {
    fn eq(&self, other: &Self) -> bool {
        self.equations == other.equations
            && self.variables == other.variables
            && self.domain == other.domain
            && self.time == other.time
    }
}

impl System {
    /// # Panics
    /// If the domain length differs from the variable count or an equation
    /// references a variable index out of range.
    pub fn new(
        equations: Vec<Expr>,
        variables: Vec<String>,
        domain: Vec<Interval>,
        time: Option<TimeAxis>,
    ) -> Self {
        assert_eq!(domain.len(), variables.len(), "one interval per variable");
        for e in &equations {
            if let Some(i) = e.max_var() {
                assert!(i < variables.len(), "variable index {i} out of range");
            }
            assert!(
                time.is_some() || !e.uses_time(),
                "time symbol used without a time axis"
            );
        }
        let programs = equations.iter().map(Program::compile).collect();
        Self {
            equations,
            variables,
            domain,
            time,
            programs,
        }
    }

    pub fn equations(&self) -> &[Expr] {
        &self.equations
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn domain(&self) -> &[Interval] {
        &self.domain
    }

    pub fn time(&self) -> Option<&TimeAxis> {
        self.time.as_ref()
    }

    pub(crate) fn programs(&self) -> &[Program] {
        &self.programs
    }

    pub fn dim(&self) -> usize {
        self.variables.len()
    }

    pub fn n_equations(&self) -> usize {
        self.equations.len()
    }

    pub fn is_square(&self) -> bool {
        self.equations.len() == self.variables.len()
    }

    pub fn with_domain(mut self, domain: Vec<Interval>) -> Self {
        assert_eq!(domain.len(), self.variables.len());
        self.domain = domain;
        self
    }

    /// The system at a frozen time value, with the time axis removed.
    pub fn at_time(&self, t: f64) -> System {
        System::new(
            self.equations.iter().map(|e| e.fix_time(t)).collect(),
            self.variables.clone(),
            self.domain.clone(),
            None,
        )
    }

    fn check_len(&self, point: &[f64]) {
        assert_eq!(
            point.len(),
            self.variables.len(),
            "point has {} coordinates, system has {} variables",
            point.len(),
            self.variables.len()
        );
    }

    /// `F(point)`; time-dependent equations see `t = 0`.
    pub fn eval(&self, point: &[f64]) -> Result<Vec<f64>, EvalError> {
        self.eval_at(point, 0.0)
    }

    pub fn eval_at(&self, point: &[f64], t: f64) -> Result<Vec<f64>, EvalError> {
        self.check_len(point);
        self.equations
            .iter()
            .enumerate()
            .map(|(equation, e)| e.eval(point, t).map_err(|kind| EvalError { equation, kind }))
            .collect()
    }

    /// `Σ_i |f_i(point)|`.
    pub fn residual_l1(&self, point: &[f64]) -> Result<f64, EvalError> {
        self.residual_l1_at(point, 0.0)
    }

    pub fn residual_l1_at(&self, point: &[f64], t: f64) -> Result<f64, EvalError> {
        Ok(self.eval_at(point, t)?.iter().map(|v| v.abs()).sum())
    }

    /// Exact Jacobian `∂f_i/∂x_j` by forward-mode differentiation of each equation.
    pub fn jacobian(&self, point: &[f64]) -> Result<DMatrix<f64>, EvalError> {
        self.jacobian_at(point, 0.0)
    }

    pub fn jacobian_at(&self, point: &[f64], t: f64) -> Result<DMatrix<f64>, EvalError> {
        self.check_len(point);
        let n = self.variables.len();
        let mut jac = DMatrix::zeros(self.equations.len(), n);
        for (i, e) in self.equations.iter().enumerate() {
            for j in 0..n {
                let (_, d) = e
                    .eval_tangent(point, t, j)
                    .map_err(|kind| EvalError { equation: i, kind })?;
                jac[(i, j)] = d;
            }
        }
        Ok(jac)
    }

    /// Adds `Σ_i w_i ∇f_i(point)` into `grad` (a vector-Jacobian product).
    pub fn accumulate_vjp(
        &self,
        point: &[f64],
        t: f64,
        weights: &[f64],
        grad: &mut [f64],
        scratch: &mut Scratch,
    ) -> Result<(), EvalError> {
        for (i, (p, &w)) in self.programs.iter().zip(weights).enumerate() {
            if w == 0.0 {
                continue;
            }
            p.eval_accumulate_grad(point, t, w, grad, scratch)
                .map_err(|kind| EvalError { equation: i, kind })?;
        }
        Ok(())
    }

    /// Renders the system back into the equation language.
    pub fn to_source(&self) -> String {
        let time_name = self.time.as_ref().map_or("t", |ax| ax.name.as_str());
        let mut s = String::new();
        writeln!(s, "vars: {}", self.variables.join(", ")).unwrap();
        if let Some(ax) = &self.time {
            writeln!(s, "time: {} in [{}, {}]", ax.name, ax.interval.lo, ax.interval.hi).unwrap();
        }
        for (name, iv) in self.variables.iter().zip(&self.domain) {
            writeln!(s, "domain: {name} in [{}, {}]", iv.lo, iv.hi).unwrap();
        }
        for e in &self.equations {
            writeln!(s, "{} = 0", e.display(&self.variables, time_name)).unwrap();
        }
        s
    }
}

impl std::str::FromStr for System {
    type Err = crate::error::ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        super::parse_system(s)
    }
}

/// True when the kind of failure is a genuine domain violation rather than overflow.
pub fn is_domain_violation(kind: DomainKind) -> bool {
    !matches!(kind, DomainKind::NonFinite)
}
