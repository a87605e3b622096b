//! Training drivers: single runs, the iterated outer loop, multi-start,
//! clustering of learned roots, and Newton polishing.

use std::time::Instant;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{Interval, System};
use crate::homotopy::{HomotopyProblem, DEFAULT_GAMMA};
use crate::net::{Architecture, NetworkParams};
use crate::sampling::lhs_unit;
use crate::train::{self, LossSpec, LossWeights, OptimizerConfig, StopReason, TrainingHistory};

/// Offset separating the collocation stream from the initialization stream.
const COLLOCATION_STREAM: u64 = 0x9E37_79B9_7F4A_7C15;

/// Starting value of the outer loop's best residual.
const OUTER_START_RESIDUAL: f64 = 1000.0;

/// Consecutive non-improving outer iterations tolerated.
const OUTER_PATIENCE: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub gamma: f64,
    pub n_collocation: usize,
    pub architecture: Architecture,
    pub seed: u64,
    pub weights: LossWeights,
    pub optimizer: OptimizerConfig,
    /// Start the output-layer bias at the anchor instead of zero, so the
    /// untrained network already sits at `x0` for every `t`.
    pub anchor_output_bias: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            gamma: DEFAULT_GAMMA,
            n_collocation: 1000,
            architecture: Architecture::default(),
            seed: 1234,
            weights: LossWeights::default(),
            optimizer: OptimizerConfig::default(),
            anchor_output_bias: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::Config(format!("gamma must be positive, got {}", self.gamma)));
        }
        if self.n_collocation == 0 {
            return Err(Error::Config("need at least one collocation point".into()));
        }
        if self.architecture.hidden.is_empty() || self.architecture.hidden.contains(&0) {
            return Err(Error::Config(format!(
                "invalid architecture {}",
                self.architecture
            )));
        }
        LossWeights::new(self.weights.initial, self.weights.residual)?;
        self.optimizer.validate()
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    /// The collocation set used by a run with this seed.
    pub fn collocation(&self) -> Result<Vec<f64>> {
        lhs_unit(self.n_collocation, self.seed.wrapping_add(COLLOCATION_STREAM))
    }

    /// Xavier-initialized network for `anchor.len()` outputs.
    pub fn init_params(&self, anchor: &[f64]) -> Result<NetworkParams> {
        let mut params =
            NetworkParams::init_xavier(self.architecture.layer_sizes(anchor.len()), self.seed)?;
        if self.anchor_output_bias {
            params.set_output_bias(anchor);
        }
        Ok(params)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Converged,
    BudgetExhausted,
    LineSearchStop,
    Error,
}

impl From<StopReason> for RunStatus {
    fn from(r: StopReason) -> Self {
        match r {
            StopReason::GradientTolerance | StopReason::LossTolerance => Self::Converged,
            StopReason::MaxIterations => Self::BudgetExhausted,
            StopReason::LineSearchFailure => Self::LineSearchStop,
            StopReason::NonFinite => Self::Error,
        }
    }
}

impl std::fmt::Display for RunStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Converged => "converged",
            Self::BudgetExhausted => "budget-exhausted",
            Self::LineSearchStop => "line-search-stop",
            Self::Error => "error",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub initial: Vec<f64>,
    pub x_final: Vec<f64>,
    /// `Σ|f_i(x_final)|`, infinite when `F` is undefined there.
    pub residual: f64,
    pub seed: u64,
    pub status: RunStatus,
    /// Optimizer (or Newton) iterations summed over all stages.
    pub iterations: usize,
    /// Training runs performed: 1 for a single run, the outer count otherwise.
    pub stages: usize,
    pub final_loss: Option<f64>,
    #[serde(skip)]
    pub loss_history: Vec<f64>,
    pub message: Option<String>,
    pub wall_time: f64,
}

impl SolveResult {
    fn failed(sys: &System, initial: &[f64], seed: u64, message: String) -> Self {
        Self {
            initial: initial.to_vec(),
            x_final: initial.to_vec(),
            residual: residual_or_inf(sys, initial),
            seed,
            status: RunStatus::Error,
            iterations: 0,
            stages: 1,
            final_loss: None,
            loss_history: Vec::new(),
            message: Some(message),
            wall_time: 0.0,
        }
    }

    pub fn is_usable(&self) -> bool {
        self.status != RunStatus::Error && self.residual.is_finite()
    }
}

pub fn residual_or_inf(sys: &System, x: &[f64]) -> f64 {
    sys.residual_l1(x).unwrap_or(f64::INFINITY)
}

/// One training run from anchor `x0`, read off at `t = 1`.
///
/// Only an anchor where `F` is undefined is an error; training trouble is
/// reported through [`SolveResult::status`].
pub fn hann1(sys: &System, x0: &[f64], cfg: &TrainConfig) -> Result<SolveResult> {
    hann1_with_params(sys, x0, cfg).map(|(r, _)| r)
}

/// [`hann1`] that also hands back the trained network, when training ran.
pub fn hann1_with_params(
    sys: &System,
    x0: &[f64],
    cfg: &TrainConfig,
) -> Result<(SolveResult, Option<NetworkParams>)> {
    cfg.validate()?;
    let hp = HomotopyProblem::new(sys.clone(), x0.to_vec(), cfg.gamma)?;
    let start = Instant::now();
    let spec = LossSpec::homotopy(hp, cfg.collocation()?)?.with_weights(cfg.weights);
    let params = cfg.init_params(x0)?;
    let (mut result, params) = match train::minimize(params, &spec, &cfg.optimizer) {
        Ok((params, history)) => (finish(sys, x0, cfg.seed, &params, history), Some(params)),
        Err(e) => (SolveResult::failed(sys, x0, cfg.seed, e.to_string()), None),
    };
    result.wall_time = start.elapsed().as_secs_f64();
    Ok((result, params))
}

/// Reads a trained network off at `t = 1`.
pub fn trained_point(params: &NetworkParams) -> Result<Vec<f64>> {
    params.forward(1.0)
}

fn finish(
    sys: &System,
    x0: &[f64],
    seed: u64,
    params: &NetworkParams,
    history: TrainingHistory,
) -> SolveResult {
    let mut status = RunStatus::from(history.stop);
    let mut message = None;
    let x_final = match trained_point(params) {
        Ok(x) => x,
        Err(e) => {
            status = RunStatus::Error;
            message = Some(e.to_string());
            x0.to_vec()
        }
    };
    let residual = match sys.residual_l1(&x_final) {
        Ok(r) => r,
        Err(e) => {
            status = RunStatus::Error;
            message = Some(e.to_string());
            f64::INFINITY
        }
    };
    SolveResult {
        initial: x0.to_vec(),
        x_final,
        residual,
        seed,
        status,
        iterations: history.iterations(),
        stages: 1,
        final_loss: Some(history.final_loss()),
        loss_history: history.losses,
        message,
        wall_time: 0.0,
    }
}

/// The outer loop with the default inner run: stage `k` (from 0) trains with
/// seed `cfg.seed + k`, so stage 0 is exactly [`hann1`].
pub fn hann2(sys: &System, x0: &[f64], n_max: usize, cfg: &TrainConfig) -> Result<SolveResult> {
    cfg.validate()?;
    hann2_with(sys, x0, n_max, cfg.seed, |x, seed| {
        hann1(sys, x, &cfg.with_seed(seed))
    })
}

/// The outer loop over an arbitrary inner solver.
///
/// Each stage that matches or beats the best residual so far becomes the
/// next anchor; the loop stops after more than ten consecutive stages
/// without such an update or after `n_max + 1` stages.
pub fn hann2_with<F>(
    sys: &System,
    x0: &[f64],
    n_max: usize,
    base_seed: u64,
    mut inner: F,
) -> Result<SolveResult>
where
    F: FnMut(&[f64], u64) -> Result<SolveResult>,
{
    sys.eval(x0).map_err(Error::InadmissibleAnchor)?;
    let start = Instant::now();
    let mut anchor = x0.to_vec();
    let mut ans_f = OUTER_START_RESIDUAL;
    let mut best: Option<SolveResult> = None;
    let mut num_t = 0;
    let mut num_l = 0;
    let mut iterations = 0;
    let mut history = Vec::new();
    while num_t <= n_max {
        let seed = base_seed.wrapping_add(num_t as u64);
        match inner(&anchor, seed) {
            Ok(run) => {
                iterations += run.iterations;
                history.extend_from_slice(&run.loss_history);
                let usable = run.is_usable();
                if usable && run.residual <= ans_f {
                    ans_f = run.residual;
                    anchor = run.x_final.clone();
                    num_l = 0;
                } else {
                    num_l += 1;
                }
                let better = best.as_ref().is_none_or(|b| {
                    usable && (!b.is_usable() || run.residual < b.residual)
                });
                if better {
                    best = Some(run);
                }
            }
            Err(_) => num_l += 1,
        }
        num_t += 1;
        if num_l > OUTER_PATIENCE {
            break;
        }
    }
    let mut out = best.unwrap_or_else(|| {
        SolveResult::failed(sys, x0, base_seed, "no stage produced a result".into())
    });
    out.initial = x0.to_vec();
    out.stages = num_t;
    out.iterations = iterations;
    out.loss_history = history;
    out.wall_time = start.elapsed().as_secs_f64();
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Algorithm {
    Hann1,
    Hann2 { n_max: usize },
    Hann1Refine,
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Hann1 => f.write_str("hann1"),
            Self::Hann2 { n_max } => write!(f, "hann2(N_m={n_max})"),
            Self::Hann1Refine => f.write_str("hann1+refine"),
        }
    }
}

/// Newton settings used after training in [`Algorithm::Hann1Refine`].
pub const REFINE_ITERS: usize = 50;
pub const REFINE_TOL: f64 = 1e-14;

pub fn solve_one(sys: &System, x0: &[f64], cfg: &TrainConfig, algo: Algorithm) -> Result<SolveResult> {
    match algo {
        Algorithm::Hann1 => hann1(sys, x0, cfg),
        Algorithm::Hann2 { n_max } => hann2(sys, x0, n_max, cfg),
        Algorithm::Hann1Refine => {
            let trained = hann1(sys, x0, cfg)?;
            if !trained.is_usable() {
                return Ok(trained);
            }
            let polished = newton_refine(sys, &trained.x_final, REFINE_ITERS, REFINE_TOL);
            Ok(SolveResult {
                x_final: polished.x_final,
                residual: polished.residual,
                iterations: trained.iterations + polished.iterations,
                message: polished.message,
                ..trained
            })
        }
    }
}

/// A group of learned points within the threshold of one another.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub representative: Vec<f64>,
    /// Index (into the clustered input) of the representative.
    pub rep_index: usize,
    pub members: Vec<usize>,
    pub min_residual: f64,
}

pub fn max_norm_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Greedy clustering in input order under the max-norm.
///
/// A point joins the first cluster whose current representative lies within
/// `threshold`, otherwise it starts a new one; the representative is the
/// member with the smallest residual. Clusters whose representatives end up
/// within `threshold` of each other are then merged, so representatives are
/// pairwise farther apart than `threshold`.
pub fn dedup(points: &[Vec<f64>], residuals: &[f64], threshold: f64) -> Vec<Cluster> {
    assert_eq!(points.len(), residuals.len());
    assert!(threshold > 0.0, "threshold must be positive");
    let mut clusters: Vec<Cluster> = Vec::new();
    for (i, p) in points.iter().enumerate() {
        let home = clusters
            .iter_mut()
            .find(|c| max_norm_distance(&c.representative, p) <= threshold);
        match home {
            Some(c) => {
                c.members.push(i);
                if residuals[i] < c.min_residual {
                    c.min_residual = residuals[i];
                    c.rep_index = i;
                    c.representative = p.clone();
                }
            }
            None => clusters.push(Cluster {
                representative: p.clone(),
                rep_index: i,
                members: vec![i],
                min_residual: residuals[i],
            }),
        }
    }
    'merge: loop {
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                if max_norm_distance(&clusters[a].representative, &clusters[b].representative)
                    <= threshold
                {
                    let other = clusters.remove(b);
                    let c = &mut clusters[a];
                    c.members.extend(other.members);
                    c.members.sort_unstable();
                    if other.min_residual < c.min_residual {
                        c.min_residual = other.min_residual;
                        c.rep_index = other.rep_index;
                        c.representative = other.representative;
                    }
                    continue 'merge;
                }
            }
        }
        break;
    }
    clusters
}

/// Which usable results take part in clustering.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ClusterFilter {
    /// Leave out runs with a larger residual.
    pub max_residual: Option<f64>,
    /// Leave out points outside this box.
    pub within: Option<Vec<Interval>>,
}

impl ClusterFilter {
    pub fn accepts(&self, r: &SolveResult) -> bool {
        r.is_usable()
            && self.max_residual.is_none_or(|c| r.residual <= c)
            && self.within.as_ref().is_none_or(|b| {
                b.iter().zip(&r.x_final).all(|(iv, &x)| iv.contains(x))
            })
    }
}

/// Raw runs from a multi-start sweep and their clusters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionSet {
    pub results: Vec<SolveResult>,
    /// Clusters over the accepted results; member indices point into `results`.
    pub clusters: Vec<Cluster>,
    pub threshold: f64,
    pub filter: ClusterFilter,
    pub warnings: Vec<String>,
}

impl SolutionSet {
    pub fn from_results(
        results: Vec<SolveResult>,
        threshold: f64,
        filter: ClusterFilter,
        warnings: Vec<String>,
    ) -> Self {
        let kept: Vec<usize> = (0..results.len())
            .filter(|&i| filter.accepts(&results[i]))
            .collect();
        let points: Vec<Vec<f64>> = kept.iter().map(|&i| results[i].x_final.clone()).collect();
        let residuals: Vec<f64> = kept.iter().map(|&i| results[i].residual).collect();
        let clusters = dedup(&points, &residuals, threshold)
            .into_iter()
            .map(|mut c| {
                c.rep_index = kept[c.rep_index];
                c.members = c.members.iter().map(|&m| kept[m]).collect();
                c
            })
            .collect();
        Self {
            results,
            clusters,
            threshold,
            filter,
            warnings,
        }
    }

    pub fn max_cluster_residual(&self) -> f64 {
        self.clusters.iter().fold(0.0, |m, c| m.max(c.min_residual))
    }
}

/// Options for [`multistart`].
#[derive(Debug, Clone, PartialEq)]
pub struct MultiStart {
    pub algorithm: Algorithm,
    pub threshold: f64,
    pub filter: ClusterFilter,
    /// Worker threads; `None` uses the available parallelism.
    pub jobs: Option<usize>,
}

/// Runs `algorithm` from every admissible initial value, in parallel,
/// collecting results in input order.
pub fn multistart(
    sys: &System,
    initials: &[Vec<f64>],
    cfg: &TrainConfig,
    opts: &MultiStart,
) -> Result<SolutionSet> {
    let runs: Vec<(Vec<f64>, u64)> = initials.iter().map(|x| (x.clone(), cfg.seed)).collect();
    multistart_seeded(sys, &runs, cfg, opts)
}

/// [`multistart`] with an individual seed for each initial value.
pub fn multistart_seeded(
    sys: &System,
    runs: &[(Vec<f64>, u64)],
    cfg: &TrainConfig,
    opts: &MultiStart,
) -> Result<SolutionSet> {
    cfg.validate()?;
    if runs.is_empty() {
        return Err(Error::Config("no initial values given".into()));
    }
    if !(opts.threshold > 0.0) {
        return Err(Error::Config("dedup threshold must be positive".into()));
    }
    let mut warnings = Vec::new();
    let admissible: Vec<&(Vec<f64>, u64)> = runs
        .iter()
        .filter(|(x0, _)| match sys.eval(x0) {
            Ok(_) => true,
            Err(e) => {
                warnings.push(format!("skipped inadmissible initial value {x0:?}: {e}"));
                false
            }
        })
        .collect();
    let pool = worker_pool(opts.jobs)?;
    let results: Vec<SolveResult> = pool.install(|| {
        admissible
            .par_iter()
            .map(|(x0, seed)| {
                solve_one(sys, x0, &cfg.with_seed(*seed), opts.algorithm)
                    .unwrap_or_else(|e| SolveResult::failed(sys, x0, *seed, e.to_string()))
            })
            .collect()
    });
    Ok(SolutionSet::from_results(
        results,
        opts.threshold,
        opts.filter.clone(),
        warnings,
    ))
}

/// Thread pool with `jobs` workers, or the available parallelism.
pub fn worker_pool(jobs: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        pool = pool.num_threads(n.max(1));
    }
    pool.build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

/// Damped Newton iteration on `F(x) = 0`.
///
/// Each step halves its length (down to `2^-30`) until the L1 residual
/// strictly decreases, so the output is never worse than the input. A
/// singular Jacobian ends the iteration with status `Error` and the best
/// point so far.
pub fn newton_refine(sys: &System, point: &[f64], max_iters: usize, tol: f64) -> SolveResult {
    let start = Instant::now();
    let mut x = point.to_vec();
    let mut r = match sys.residual_l1(&x) {
        Ok(r) => r,
        Err(e) => return SolveResult::failed(sys, point, 0, e.to_string()),
    };
    let mut status = RunStatus::BudgetExhausted;
    let mut message = None;
    let mut iterations = 0;
    while iterations < max_iters {
        if r <= tol {
            status = RunStatus::Converged;
            break;
        }
        let step = sys
            .eval(&x)
            .and_then(|f| sys.jacobian(&x).map(|j| (f, j)))
            .map_err(|e| e.to_string())
            .and_then(|(f, j)| {
                let sv = j.clone().singular_values();
                if !(sv.min() > 1e-14 * sv.max()) {
                    return Err("singular Jacobian".to_string());
                }
                j.lu()
                    .solve(&-DVector::from_vec(f))
                    .ok_or_else(|| "singular Jacobian".to_string())
            });
        let dx = match step {
            Ok(dx) => dx,
            Err(m) => {
                status = RunStatus::Error;
                message = Some(m);
                break;
            }
        };
        let mut lambda = 1.0;
        let accepted = loop {
            let trial: Vec<f64> = x.iter().zip(dx.iter()).map(|(a, d)| a + lambda * d).collect();
            if let Ok(rt) = sys.residual_l1(&trial) {
                if rt < r {
                    break Some((trial, rt));
                }
            }
            lambda *= 0.5;
            if lambda < f64::powi(2.0, -30) {
                break None;
            }
        };
        iterations += 1;
        match accepted {
            Some((xn, rn)) => {
                x = xn;
                r = rn;
            }
            None => {
                status = RunStatus::LineSearchStop;
                break;
            }
        }
    }
    if status == RunStatus::BudgetExhausted && r <= tol {
        status = RunStatus::Converged;
    }
    SolveResult {
        initial: point.to_vec(),
        x_final: x,
        residual: r,
        seed: 0,
        status,
        iterations,
        stages: 1,
        final_loss: None,
        loss_history: Vec::new(),
        message,
        wall_time: start.elapsed().as_secs_f64(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_system;

    fn fake(residual: f64) -> SolveResult {
        SolveResult {
            initial: vec![0.0],
            x_final: vec![residual],
            residual,
            seed: 0,
            status: RunStatus::Converged,
            iterations: 1,
            stages: 1,
            final_loss: Some(0.0),
            loss_history: vec![0.0],
            message: None,
            wall_time: 0.0,
        }
    }

    fn line() -> System {
        parse_system("vars: x\nx = 0").unwrap()
    }

    #[test]
    fn outer_loop_constant_residual_runs_to_budget() {
        let mut calls = 0;
        let out = hann2_with(&line(), &[1.0], 30, 0, |_, _| {
            calls += 1;
            Ok(fake(5.0))
        })
        .unwrap();
        assert_eq!(calls, 31);
        assert_eq!(out.stages, 31);
        assert_eq!(out.residual, 5.0);
    }

    #[test]
    fn outer_loop_stalls_after_eleven_rejections() {
        let mut calls = 0;
        let out = hann2_with(&line(), &[1.0], 100, 0, |_, _| {
            calls += 1;
            Ok(fake(if calls == 1 { 5.0 } else { 6.0 }))
        })
        .unwrap();
        assert_eq!(calls, 12);
        assert_eq!(out.residual, 5.0);
    }

    #[test]
    fn outer_loop_feeds_best_point_back() {
        let mut anchors = Vec::new();
        let mut seeds = Vec::new();
        hann2_with(&line(), &[9.0], 3, 40, |x, seed| {
            anchors.push(x[0]);
            seeds.push(seed);
            let r = [3.0, 7.0, 2.0, 1.0][anchors.len() - 1];
            Ok(fake(r))
        })
        .unwrap();
        assert_eq!(anchors, vec![9.0, 3.0, 3.0, 2.0]);
        assert_eq!(seeds, vec![40, 41, 42, 43]);
    }

    #[test]
    fn outer_loop_absorbs_inner_errors() {
        let mut calls = 0;
        let out = hann2_with(&line(), &[1.0], 50, 0, |_, _| {
            calls += 1;
            if calls == 2 {
                Ok(fake(0.5))
            } else {
                Err(Error::Config("boom".into()))
            }
        })
        .unwrap();
        assert_eq!(out.residual, 0.5);
        assert_eq!(calls, 13);
    }

    #[test]
    fn outer_loop_rejects_bad_anchor() {
        let sys = parse_system("1/x = 0").unwrap();
        let err = hann2_with(&sys, &[0.0], 5, 0, |_, _| Ok(fake(1.0))).unwrap_err();
        assert!(matches!(err, Error::InadmissibleAnchor(_)));
    }

    #[test]
    fn dedup_examples() {
        let pts = vec![vec![0.1], vec![0.11], vec![0.5]];
        let c = dedup(&pts, &[0.3, 0.2, 0.1], 0.05);
        assert_eq!(c.len(), 2);
        assert_eq!(c[0].members, vec![0, 1]);
        assert_eq!(c[0].rep_index, 1);
        assert_eq!(c[1].members, vec![2]);
        assert_eq!(dedup(&pts, &[0.0; 3], 1e-3).len(), 3);
        assert_eq!(dedup(&pts[..1], &[0.0], 1.0).len(), 1);
    }

    #[test]
    fn dedup_merges_drifting_representatives() {
        let pts = vec![vec![0.0], vec![0.19], vec![0.095]];
        let c = dedup(&pts, &[1.0, 1.0, 0.0], 0.1);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].members, vec![0, 1, 2]);
        assert_eq!(c[0].representative, vec![0.095]);
    }

    #[test]
    fn newton_on_linear_root_is_a_no_op() {
        let sys = parse_system("vars: x, y\nx + y - 1 = 0\nx - y = 0").unwrap();
        let out = newton_refine(&sys, &[0.5, 0.5], 20, 1e-12);
        assert_eq!(out.iterations, 0);
        assert_eq!(out.x_final, vec![0.5, 0.5]);
        assert_eq!(out.status, RunStatus::Converged);
    }

    #[test]
    fn newton_converges_quadratically() {
        let sys = parse_system("vars: x, y\nx^2 + y^2 - 4 = 0\nx - y = 0").unwrap();
        let out = newton_refine(&sys, &[1.0, 1.7], 20, 1e-13);
        assert!(out.residual <= 1e-13);
        assert!(out.iterations <= 8);
        let r = 2f64.sqrt();
        assert!((out.x_final[0] - r).abs() < 1e-12);
    }

    #[test]
    fn newton_singular_jacobian() {
        let sys = parse_system("vars: x, y\nx + y - 1 = 0\n2*x + 2*y - 3 = 0").unwrap();
        let out = newton_refine(&sys, &[0.0, 0.0], 20, 1e-12);
        assert_eq!(out.status, RunStatus::Error);
        assert_eq!(out.x_final, vec![0.0, 0.0]);
    }

    #[test]
    fn newton_near_abs_kink_never_worsens() {
        let sys = parse_system("x^2 - y^2 = 0\n1 - abs(x - y) = 0").unwrap();
        let p = [0.49, -0.51];
        let before = sys.residual_l1(&p).unwrap();
        let out = newton_refine(&sys, &p, 20, 1e-12);
        assert!(out.residual <= before);
    }

    #[test]
    fn linear_hann1() {
        let cfg = TrainConfig {
            n_collocation: 50,
            architecture: Architecture::new(2, 8),
            ..TrainConfig::default()
        };
        let out = hann1(&line(), &[0.3], &cfg).unwrap();
        assert!(out.x_final[0].abs() < 1e-3, "{out:?}");
        assert_eq!(out.residual, line().residual_l1(&out.x_final).unwrap());
    }
}
