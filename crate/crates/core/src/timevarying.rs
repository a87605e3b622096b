//! Trajectories `x(t)` of systems `F(x(t), t) = 0` over a time interval,
//! trained directly with `t` as the network input.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{Interval, System};
use crate::hann::{hann1, newton_refine, TrainConfig};
use crate::net::NetworkParams;
use crate::train::{self, LossSpec, StopReason, TrainingHistory};

/// Largest `Σ|f_i(x*, a)|` accepted for anchor values.
pub const ANCHOR_TOL: f64 = 1e-8;

/// Points in the dense evaluation grid.
pub const DEFAULT_GRID: usize = 1001;

const ANCHOR_NEWTON_ITERS: usize = 100;
const ANCHOR_NEWTON_TOL: f64 = 1e-13;

/// A time-varying system together with its values at the left end of the interval.
#[derive(Debug, Clone)]
pub struct TimeVaryingProblem {
    system: System,
    anchors: Vec<f64>,
}

impl TimeVaryingProblem {
    /// Checks that `anchors` solve the system at `t = a`.
    pub fn new(system: System, anchors: Vec<f64>) -> Result<Self> {
        let iv = time_interval(&system)?;
        if anchors.len() != system.dim() {
            return Err(Error::Config(format!(
                "{} anchor values for {} variables",
                anchors.len(),
                system.dim()
            )));
        }
        let r = system
            .residual_l1_at(&anchors, iv.lo)
            .map_err(Error::InadmissibleAnchor)?;
        if !(r <= ANCHOR_TOL) {
            return Err(Error::AnchorSolve(r));
        }
        Ok(Self { system, anchors })
    }

    /// Computes the anchors with [`compute_anchors`] first.
    pub fn from_hint(system: System, hint: Option<&[f64]>, cfg: &TrainConfig) -> Result<Self> {
        let anchors = compute_anchors(&system, hint, cfg)?;
        Self::new(system, anchors)
    }

    pub fn system(&self) -> &System {
        &self.system
    }

    pub fn anchors(&self) -> &[f64] {
        &self.anchors
    }

    pub fn interval(&self) -> Interval {
        self.system.time().expect("checked on construction").interval
    }
}

fn time_interval(system: &System) -> Result<Interval> {
    let axis = system
        .time()
        .ok_or_else(|| Error::Config("system has no time axis".into()))?;
    if !system.is_square() {
        return Err(Error::Config(format!(
            "{} equations in {} unknowns",
            system.n_equations(),
            system.dim()
        )));
    }
    Ok(axis.interval)
}

/// Solves `F(x, a) = 0` for the anchor values.
///
/// Newton starts from `hint`; without one, a homotopy run from the centre of
/// the domain provides the starting point.
pub fn compute_anchors(system: &System, hint: Option<&[f64]>, cfg: &TrainConfig) -> Result<Vec<f64>> {
    let iv = time_interval(system)?;
    let frozen = system.at_time(iv.lo);
    let start = match hint {
        Some(h) => {
            if h.len() != system.dim() {
                return Err(Error::Config(format!(
                    "hint has {} coordinates, system has {} variables",
                    h.len(),
                    system.dim()
                )));
            }
            h.to_vec()
        }
        None => {
            let centre: Vec<f64> = frozen.domain().iter().map(Interval::midpoint).collect();
            hann1(&frozen, &centre, cfg)?.x_final
        }
    };
    let out = newton_refine(&frozen, &start, ANCHOR_NEWTON_ITERS, ANCHOR_NEWTON_TOL);
    if out.residual <= ANCHOR_TOL {
        Ok(out.x_final)
    } else {
        Err(Error::AnchorSolve(out.residual))
    }
}

/// A trained network evaluated on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub variables: Vec<String>,
    pub times: Vec<f64>,
    /// `states[k][j]` is `x̂_j(times[k])`.
    pub states: Vec<Vec<f64>>,
    /// `residuals[k][i]` is `|f_i(x̂(t_k), t_k)|`, infinite where undefined.
    pub residuals: Vec<Vec<f64>>,
    /// Absolute errors against a known exact solution.
    pub errors: Option<Vec<Vec<f64>>>,
}

impl Trajectory {
    /// Evaluates `params` on `points` equally spaced times covering the system's interval.
    pub fn evaluate(
        params: &NetworkParams,
        system: &System,
        points: usize,
        exact: Option<&dyn Fn(f64) -> Vec<f64>>,
    ) -> Result<Self> {
        let iv = time_interval(system)?;
        if points < 2 {
            return Err(Error::Config("the evaluation grid needs at least 2 points".into()));
        }
        let inputs: Vec<f64> = (0..points).map(|k| k as f64 / (points - 1) as f64).collect();
        let times: Vec<f64> = inputs.iter().map(|u| iv.lo + u * iv.width()).collect();
        let states = params.forward_batch(&inputs)?;
        let residuals = states
            .iter()
            .zip(&times)
            .map(|(x, &t)| match system.eval_at(x, t) {
                Ok(f) => f.iter().map(|v| v.abs()).collect(),
                Err(_) => vec![f64::INFINITY; system.n_equations()],
            })
            .collect();
        let errors = exact.map(|sol| {
            states
                .iter()
                .zip(&times)
                .map(|(x, &t)| x.iter().zip(sol(t)).map(|(a, b)| (a - b).abs()).collect())
                .collect()
        });
        Ok(Self {
            variables: system.variables().to_vec(),
            times,
            states,
            residuals,
            errors,
        })
    }

    /// `Σ_i |f_i|` at each grid time.
    pub fn residual_l1(&self) -> Vec<f64> {
        self.residuals.iter().map(|r| r.iter().sum()).collect()
    }

    /// Largest absolute error of each variable over the grid.
    pub fn max_errors(&self) -> Option<Vec<f64>> {
        self.errors.as_ref().map(|rows| {
            let mut m = vec![0.0f64; self.variables.len()];
            for row in rows {
                for (mj, e) in m.iter_mut().zip(row) {
                    *mj = mj.max(*e);
                }
            }
            m
        })
    }

    /// Columns `t, x_1..x_n, r_1..r_n` and, when known, `e_1..e_n`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let mut header = vec!["t".to_string()];
        header.extend(self.variables.iter().cloned());
        header.extend((1..=self.residuals.first().map_or(0, Vec::len)).map(|i| format!("r_{i}")));
        if self.errors.is_some() {
            header.extend(self.variables.iter().map(|v| format!("err_{v}")));
        }
        writeln!(w, "{}", header.join(","))?;
        for k in 0..self.times.len() {
            let mut row = vec![format!("{:e}", self.times[k])];
            row.extend(self.states[k].iter().map(|v| format!("{v:e}")));
            row.extend(self.residuals[k].iter().map(|v| format!("{v:e}")));
            if let Some(e) = &self.errors {
                row.extend(e[k].iter().map(|v| format!("{v:e}")));
            }
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TimeVaryingSolution {
    pub params: NetworkParams,
    pub history: TrainingHistory,
    pub trajectory: Trajectory,
    pub wall_time: f64,
}

/// Trains on `cfg.n_collocation` LHS times in `[a, b]` plus `a` itself and
/// evaluates the result on `grid` uniform points.
pub fn solve_time_varying(
    problem: &TimeVaryingProblem,
    cfg: &TrainConfig,
    grid: usize,
    exact: Option<&dyn Fn(f64) -> Vec<f64>>,
) -> Result<TimeVaryingSolution> {
    cfg.validate()?;
    let start = Instant::now();
    let iv = problem.interval();
    let times: Vec<f64> = std::iter::once(iv.lo)
        .chain(cfg.collocation()?.into_iter().map(|u| (iv.lo + u * iv.width()).min(iv.hi)))
        .collect();
    let spec = LossSpec::time_varying(problem.system.clone(), problem.anchors.clone(), times)?
        .with_weights(cfg.weights);
    let (params, history) = train::minimize(cfg.init_params(&problem.anchors)?, &spec, &cfg.optimizer)?;
    if history.stop == StopReason::NonFinite {
        return Err(Error::NonFiniteLoss {
            point: 0,
            t: iv.lo,
            equation: None,
        });
    }
    let trajectory = Trajectory::evaluate(&params, &problem.system, grid, exact)?;
    Ok(TimeVaryingSolution {
        params,
        history,
        trajectory,
        wall_time: start.elapsed().as_secs_f64(),
    })
}
