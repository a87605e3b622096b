//! Loss assembly and the two optimizers (L-BFGS with a strong Wolfe line
//! search, and Adam).

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::autodiff;
use crate::error::{Error, Result};
use crate::expr::System;
use crate::homotopy::HomotopyProblem;
use crate::net::NetworkParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub initial: f64,
    pub residual: f64,
}

impl LossWeights {
    pub fn new(initial: f64, residual: f64) -> Result<Self> {
        let ok = |w: f64| w >= 0.0 && w.is_finite();
        if !ok(initial) || !ok(residual) || initial + residual == 0.0 {
            return Err(Error::Config(format!(
                "loss weights must be non-negative and not both zero, got ({initial}, {residual})"
            )));
        }
        Ok(Self { initial, residual })
    }
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            initial: 1.0,
            residual: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub enum LossMode {
    Homotopy(HomotopyProblem),
    TimeVarying(System),
}

/// Everything needed to evaluate the training loss for a given network.
///
/// Collocation inputs are stored sorted, which makes the loss independent of
/// the order in which they were supplied.
#[derive(Debug, Clone)]
pub struct LossSpec {
    mode: LossMode,
    target: Vec<f64>,
    weights: LossWeights,
    collocation: Vec<f64>,
}

fn sorted_inputs(mut points: Vec<f64>) -> Result<Vec<f64>> {
    if points.is_empty() {
        return Err(Error::Config("at least one collocation point is required".into()));
    }
    if points.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(Error::Config("collocation points must lie in the input interval".into()));
    }
    points.sort_by(f64::total_cmp);
    Ok(points)
}

impl LossSpec {
    /// Homotopy mode; `collocation` are values of `t` in `[0, 1]`.
    pub fn homotopy(problem: HomotopyProblem, collocation: Vec<f64>) -> Result<Self> {
        Ok(Self {
            target: problem.x0().to_vec(),
            mode: LossMode::Homotopy(problem),
            weights: LossWeights::default(),
            collocation: sorted_inputs(collocation)?,
        })
    }

    /// Time-varying mode; `times` lie in the system's time interval and
    /// `initial` is the solution at its left end.
    pub fn time_varying(system: System, initial: Vec<f64>, times: Vec<f64>) -> Result<Self> {
        let Some(axis) = system.time() else {
            return Err(Error::Config("system has no time axis".into()));
        };
        if initial.len() != system.dim() || system.n_equations() == 0 {
            return Err(Error::Config(format!(
                "initial value has {} coordinates, system has {} variables",
                initial.len(),
                system.dim()
            )));
        }
        let iv = axis.interval;
        if times.iter().any(|t| !iv.contains(*t)) {
            return Err(Error::Config(format!(
                "collocation times must lie in [{}, {}]",
                iv.lo, iv.hi
            )));
        }
        let inputs = times.iter().map(|t| (t - iv.lo) / iv.width()).collect();
        Ok(Self {
            mode: LossMode::TimeVarying(system),
            target: initial,
            weights: LossWeights::default(),
            collocation: sorted_inputs(inputs)?,
        })
    }

    pub fn with_weights(mut self, weights: LossWeights) -> Self {
        self.weights = weights;
        self
    }

    pub fn mode(&self) -> &LossMode {
        &self.mode
    }

    pub fn system(&self) -> &System {
        match &self.mode {
            LossMode::Homotopy(hp) => hp.base(),
            LossMode::TimeVarying(sys) => sys,
        }
    }

    pub fn weights(&self) -> LossWeights {
        self.weights
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn outputs(&self) -> usize {
        self.target.len()
    }

    /// Network inputs of the collocation points, sorted, in `[0, 1]`.
    pub fn collocation(&self) -> &[f64] {
        &self.collocation
    }

    pub fn n_collocation(&self) -> usize {
        self.collocation.len()
    }

    /// Maps a network input to the time seen by the equations.
    pub fn physical_time(&self, input: f64) -> f64 {
        match &self.mode {
            LossMode::Homotopy(_) => input,
            LossMode::TimeVarying(sys) => {
                let iv = sys.time().expect("time-varying system").interval;
                iv.lo + input * iv.width()
            }
        }
    }

    /// The network input batch: the start point followed by the collocation points.
    pub(crate) fn batch_inputs(&self) -> Vec<f64> {
        std::iter::once(0.0)
            .chain(self.collocation.iter().copied())
            .collect()
    }

    /// `(collocation index, time)` of a batch row, for error reports.
    pub(crate) fn locate(&self, row: usize) -> (usize, f64) {
        let input = if row == 0 { 0.0 } else { self.collocation[row - 1] };
        (row.saturating_sub(1), self.physical_time(input))
    }
}

/// Evaluates the training loss for `params`.
pub fn assemble_loss(spec: &LossSpec, params: &NetworkParams) -> Result<f64> {
    autodiff::loss(params, spec)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Lbfgs,
    Adam,
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lbfgs" | "l-bfgs" => Ok(Self::Lbfgs),
            "adam" => Ok(Self::Adam),
            _ => Err(Error::Config(format!("unknown optimizer `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub max_iters: usize,
    pub gtol: f64,
    pub ftol: f64,
    pub memory: usize,
    pub c1: f64,
    pub c2: f64,
    pub step_size: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            kind: OptimizerKind::Lbfgs,
            max_iters: 5000,
            gtol: 1e-9,
            ftol: 1e-12,
            memory: 10,
            c1: 1e-4,
            c2: 0.9,
            step_size: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl OptimizerConfig {
    pub fn adam() -> Self {
        Self {
            kind: OptimizerKind::Adam,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.into()));
        if !(0.0 < self.c1 && self.c1 < self.c2 && self.c2 < 1.0) {
            return bad("line-search constants need 0 < c1 < c2 < 1");
        }
        if self.memory == 0 {
            return bad("L-BFGS memory must be at least 1");
        }
        if !(self.step_size > 0.0) || !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2)
        {
            return bad("Adam needs a positive step and betas in [0, 1)");
        }
        if self.gtol < 0.0 || self.ftol < 0.0 || self.eps <= 0.0 {
            return bad("tolerances must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    GradientTolerance,
    LossTolerance,
    MaxIterations,
    LineSearchFailure,
    NonFinite,
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::GradientTolerance => "gradient-tolerance",
            Self::LossTolerance => "loss-tolerance",
            Self::MaxIterations => "max-iterations",
            Self::LineSearchFailure => "line-search-failure",
            Self::NonFinite => "non-finite",
        })
    }
}

/// Loss after each accepted iteration; entry 0 is the starting loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistory {
    pub losses: Vec<f64>,
    pub evaluations: usize,
    pub stop: StopReason,
}

impl TrainingHistory {
    pub fn iterations(&self) -> usize {
        self.losses.len().saturating_sub(1)
    }

    pub fn final_loss(&self) -> f64 {
        *self.losses.last().expect("history holds the starting loss")
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "iteration,loss")?;
        for (i, l) in self.losses.iter().enumerate() {
            writeln!(w, "{i},{l:e}")?;
        }
        Ok(())
    }
}

/// Trains `params` on `spec` with the configured optimizer.
pub fn minimize(
    params: NetworkParams,
    spec: &LossSpec,
    cfg: &OptimizerConfig,
) -> Result<(NetworkParams, TrainingHistory)> {
    cfg.validate()?;
    let objective = |theta: &[f64]| autodiff::loss_and_grad(&params.with_theta(theta.to_vec()), spec);
    let theta0 = params.theta().to_vec();
    let (theta, history) = match cfg.kind {
        OptimizerKind::Lbfgs => lbfgs(theta0, objective, cfg)?,
        OptimizerKind::Adam => adam(theta0, objective, cfg)?,
    };
    Ok((params.with_theta(theta), history))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

struct Trial {
    alpha: f64,
    f: f64,
    d: f64,
    x: Vec<f64>,
    g: Vec<f64>,
}

const MAX_BRACKET: usize = 30;
const MAX_ZOOM: usize = 40;

/// Strong Wolfe search along `p`. Returns the accepted trial and whether it
/// satisfies the curvature condition too (otherwise only sufficient decrease).
fn wolfe_search<F>(
    f: &mut F,
    x: &[f64],
    f0: f64,
    g0: &[f64],
    p: &[f64],
    alpha0: f64,
    cfg: &OptimizerConfig,
    evals: &mut usize,
) -> Option<(Trial, bool)>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let d0 = dot(g0, p);
    let mut probe = |alpha: f64| -> Option<Trial> {
        *evals += 1;
        let xt: Vec<f64> = x.iter().zip(p).map(|(xi, pi)| xi + alpha * pi).collect();
        match f(&xt) {
            Ok((ft, gt)) if ft.is_finite() && gt.iter().all(|v| v.is_finite()) => Some(Trial {
                alpha,
                f: ft,
                d: dot(&gt, p),
                x: xt,
                g: gt,
            }),
            _ => None,
        }
    };
    let armijo = |t: &Trial| t.f <= f0 + cfg.c1 * t.alpha * d0;
    let curvature = |t: &Trial| t.d.abs() <= -cfg.c2 * d0;

    let mut prev = Trial {
        alpha: 0.0,
        f: f0,
        d: d0,
        x: x.to_vec(),
        g: g0.to_vec(),
    };
    let mut alpha = alpha0;
    let mut i = 0;
    let (mut lo, mut hi) = loop {
        if i == MAX_BRACKET {
            return (prev.alpha > 0.0).then_some((prev, false));
        }
        i += 1;
        let Some(t) = probe(alpha) else {
            alpha = 0.5 * (prev.alpha + alpha);
            continue;
        };
        if !armijo(&t) || (i > 1 && t.f >= prev.f) {
            break (prev, t);
        }
        if curvature(&t) {
            return Some((t, true));
        }
        if t.d >= 0.0 {
            break (t, prev);
        }
        alpha = 2.0 * t.alpha;
        prev = t;
    };
    for _ in 0..MAX_ZOOM {
        let width = hi.alpha - lo.alpha;
        if width.abs() <= 1e-16 * lo.alpha.abs().max(1e-300) {
            break;
        }
        let mut a = cubic_min(&lo, &hi);
        let (left, right) = if lo.alpha < hi.alpha {
            (lo.alpha, hi.alpha)
        } else {
            (hi.alpha, lo.alpha)
        };
        let margin = 0.1 * (right - left);
        if !(a > left + margin && a < right - margin) {
            a = 0.5 * (lo.alpha + hi.alpha);
        }
        let Some(t) = probe(a) else {
            hi = Trial {
                alpha: a,
                f: f64::INFINITY,
                d: f64::NAN,
                x: Vec::new(),
                g: Vec::new(),
            };
            continue;
        };
        if !armijo(&t) || t.f >= lo.f {
            hi = t;
        } else {
            if curvature(&t) {
                return Some((t, true));
            }
            if t.d * (hi.alpha - lo.alpha) >= 0.0 {
                hi = lo;
            }
            lo = t;
        }
    }
    (lo.alpha > 0.0).then_some((lo, false))
}

/// Minimizer of the cubic matching values and slopes at both trials.
fn cubic_min(a: &Trial, b: &Trial) -> f64 {
    if !b.f.is_finite() || !b.d.is_finite() {
        return f64::NAN;
    }
    let d1 = a.d + b.d - 3.0 * (a.f - b.f) / (a.alpha - b.alpha);
    let disc = d1 * d1 - a.d * b.d;
    if disc < 0.0 {
        return f64::NAN;
    }
    let d2 = (b.alpha - a.alpha).signum() * disc.sqrt();
    b.alpha - (b.alpha - a.alpha) * (b.d + d2 - d1) / (b.d - a.d + 2.0 * d2)
}

/// Limited-memory BFGS on a generic objective returning `(value, gradient)`.
///
/// Fails only if the objective cannot be evaluated at the starting point.
pub fn lbfgs<F>(
    x0: Vec<f64>,
    mut f: F,
    cfg: &OptimizerConfig,
) -> Result<(Vec<f64>, TrainingHistory)>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let (mut fx, mut g) = f(&x0)?;
    if !fx.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteLoss {
            point: 0,
            t: 0.0,
            equation: None,
        });
    }
    let mut x = x0;
    let mut evals = 1;
    let mut losses = vec![fx];
    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let mut rho: Vec<f64> = Vec::new();

    let stop = loop {
        if inf_norm(&g) <= cfg.gtol {
            break StopReason::GradientTolerance;
        }
        if losses.len() > cfg.max_iters {
            break StopReason::MaxIterations;
        }
        let mut p = two_loop(&g, &s_hist, &y_hist, &rho);
        if !(dot(&g, &p) < 0.0) {
            s_hist.clear();
            y_hist.clear();
            rho.clear();
            p = g.iter().map(|v| -v).collect();
        }
        let alpha0 = if s_hist.is_empty() {
            (1.0 / dot(&g, &g).sqrt()).min(1.0)
        } else {
            1.0
        };
        let Some((t, wolfe)) = wolfe_search(&mut f, &x, fx, &g, &p, alpha0, cfg, &mut evals)
        else {
            break StopReason::LineSearchFailure;
        };
        let s: Vec<f64> = t.x.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = t.g.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        let f_old = fx;
        x = t.x;
        fx = t.f;
        g = t.g;
        losses.push(fx);
        if sy > 1e-10 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
            if s_hist.len() == cfg.memory {
                s_hist.remove(0);
                y_hist.remove(0);
                rho.remove(0);
            }
            s_hist.push(s);
            y_hist.push(y);
            rho.push(1.0 / sy);
        }
        if !wolfe {
            break StopReason::LineSearchFailure;
        }
        if (f_old - fx) <= cfg.ftol * f_old.abs().max(fx.abs()).max(1.0) {
            break StopReason::LossTolerance;
        }
    };
    Ok((
        x,
        TrainingHistory {
            losses,
            evaluations: evals,
            stop,
        },
    ))
}

fn two_loop(g: &[f64], s: &[Vec<f64>], y: &[Vec<f64>], rho: &[f64]) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alpha = vec![0.0; s.len()];
    for i in (0..s.len()).rev() {
        alpha[i] = rho[i] * dot(&s[i], &q);
        for (qj, yj) in q.iter_mut().zip(&y[i]) {
            *qj -= alpha[i] * yj;
        }
    }
    if let (Some(sl), Some(yl)) = (s.last(), y.last()) {
        let gamma = dot(sl, yl) / dot(yl, yl);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for i in 0..s.len() {
        let beta = rho[i] * dot(&y[i], &q);
        for (qj, sj) in q.iter_mut().zip(&s[i]) {
            *qj += (alpha[i] - beta) * sj;
        }
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

/// Adam with bias correction for a fixed number of steps.
///
/// A non-finite loss mid-run stops early and returns the last good point.
pub fn adam<F>(x0: Vec<f64>, mut f: F, cfg: &OptimizerConfig) -> Result<(Vec<f64>, TrainingHistory)>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let mut x = x0;
    let (f0, mut g) = f(&x)?;
    let mut losses = vec![f0];
    let mut m = vec![0.0; x.len()];
    let mut v = vec![0.0; x.len()];
    let mut evals = 1;
    let mut stop = StopReason::MaxIterations;
    for k in 1..=cfg.max_iters {
        let b1 = 1.0 - cfg.beta1.powi(k as i32);
        let b2 = 1.0 - cfg.beta2.powi(k as i32);
        let next: Vec<f64> = (0..x.len())
            .map(|i| {
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
                let mh = m[i] / b1;
                let vh = v[i] / b2;
                x[i] - cfg.step_size * mh / (vh.sqrt() + cfg.eps)
            })
            .collect();
        evals += 1;
        match f(&next) {
            Ok((fx, gx)) if fx.is_finite() && gx.iter().all(|v| v.is_finite()) => {
                x = next;
                g = gx;
                losses.push(fx);
            }
            _ => {
                stop = StopReason::NonFinite;
                break;
            }
        }
    }
    Ok((
        x,
        TrainingHistory {
            losses,
            evaluations: evals,
            stop,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic(c: Vec<f64>) -> impl FnMut(&[f64]) -> Result<(f64, Vec<f64>)> {
        move |x: &[f64]| {
            let d: Vec<f64> = x.iter().zip(&c).map(|(a, b)| a - b).collect();
            Ok((dot(&d, &d), d.iter().map(|v| 2.0 * v).collect()))
        }
    }

    #[test]
    fn lbfgs_solves_quadratic_quickly() {
        let c = vec![1.5, -2.0, 0.25, 7.0];
        let (x, h) = lbfgs(vec![0.0; 4], quadratic(c.clone()), &OptimizerConfig::default()).unwrap();
        assert!(h.iterations() <= 3, "{h:?}");
        let g: Vec<f64> = x.iter().zip(&c).map(|(a, b)| 2.0 * (a - b)).collect();
        assert!(dot(&g, &g).sqrt() < 1e-10);
    }

    #[test]
    fn lbfgs_stationary_start() {
        let c = vec![3.0, 4.0];
        let (x, h) = lbfgs(c.clone(), quadratic(c.clone()), &OptimizerConfig::default()).unwrap();
        assert_eq!(x, c);
        assert_eq!(h.iterations(), 0);
        assert_eq!(h.stop, StopReason::GradientTolerance);
    }

    #[test]
    fn lbfgs_rosenbrock_monotone() {
        let rosen = |x: &[f64]| {
            let (a, b) = (x[0], x[1]);
            let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            let g = vec![
                -2.0 * (1.0 - a) - 400.0 * a * (b - a * a),
                200.0 * (b - a * a),
            ];
            Ok((f, g))
        };
        let (x, h) = lbfgs(vec![-1.2, 1.0], rosen, &OptimizerConfig::default()).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-6 && (x[1] - 1.0).abs() < 1e-6, "{x:?}");
        for w in h.losses.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn lbfgs_bad_start_is_an_error() {
        let f = |_: &[f64]| Ok((f64::NAN, vec![0.0]));
        assert!(lbfgs(vec![0.0], f, &OptimizerConfig::default()).is_err());
    }

    #[test]
    fn adam_first_step_is_signed_step_size() {
        let cfg = OptimizerConfig {
            max_iters: 1,
            ..OptimizerConfig::adam()
        };
        let c = vec![1.0, -3.0, 0.5];
        let x0 = vec![0.0, 0.0, 2.0];
        let (x, _) = adam(x0.clone(), quadratic(c), &cfg).unwrap();
        let expected = [1e-3, -1e-3, -1e-3];
        for i in 0..3 {
            assert!((x[i] - x0[i] - expected[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn adam_makes_progress_and_is_deterministic() {
        let c = vec![0.3, -0.7, 1.1];
        let run = |n| {
            let cfg = OptimizerConfig {
                max_iters: n,
                ..OptimizerConfig::adam()
            };
            adam(vec![0.0; 3], quadratic(c.clone()), &cfg).unwrap()
        };
        let (_, short) = run(10);
        let (a, long) = run(1000);
        let (b, again) = run(1000);
        assert!(long.final_loss() < short.final_loss());
        assert_eq!(a, b);
        assert_eq!(long, again);
    }

    #[test]
    fn adam_stops_on_non_finite() {
        let f = |x: &[f64]| {
            if x[0] > 0.0025 {
                Ok((f64::INFINITY, vec![-1.0]))
            } else {
                Ok((-x[0], vec![-1.0]))
            }
        };
        let (x, h) = adam(vec![0.0], f, &OptimizerConfig::adam()).unwrap();
        assert_eq!(h.stop, StopReason::NonFinite);
        assert!(x[0] <= 0.0025);
    }

    #[test]
    fn config_validation() {
        let mut cfg = OptimizerConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.c2 = 1e-5;
        assert!(cfg.validate().is_err());
        let cfg = OptimizerConfig {
            memory: 0,
            ..OptimizerConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn history_csv() {
        let h = TrainingHistory {
            losses: vec![2.0, 0.5],
            evaluations: 3,
            stop: StopReason::LossTolerance,
        };
        let mut out = Vec::new();
        h.write_csv(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "iteration,loss\n0,2e0\n1,5e-1\n");
    }
}
