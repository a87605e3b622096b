//! The six built-in benchmark problems, their published settings and
//! reference data, and the sweep drivers.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{parse_system, Interval, System};
use crate::hann::{
    hann1, max_norm_distance, multistart_seeded, worker_pool, Algorithm, ClusterFilter,
    MultiStart, SolutionSet, TrainConfig,
};
use crate::net::Architecture;
use crate::sampling::{SamplePlan, Scheme};
use crate::timevarying::{solve_time_varying, TimeVaryingProblem, TimeVaryingSolution, DEFAULT_GRID};
use crate::train::OptimizerConfig;

pub const NAMES: [&str; 6] = [
    "single-eq",
    "abs-system",
    "trig-system",
    "interval10",
    "combustion10",
    "time-varying",
];

/// Sub-interval counts offered for the single equation.
pub const SUBINTERVALS: [usize; 6] = [2, 4, 8, 16, 32, 40];

/// Largest distance at which a cluster is paired with a reference point.
pub const MATCH_RADIUS: f64 = 5e-2;

/// Runs of the trig case above this residual are stuck in a local minimum
/// of the loss and are not clustered.
pub const TRIG_MAX_RESIDUAL: f64 = 2e-2;

const SINGLE_EQ: &str = "\
vars: x
domain: x in [-40, 0]
1/x - sin(x) + 1 = 0
";

const ABS_SYSTEM: &str = "\
vars: x, y
domain: * in [-15, 15]
x^2 - y^2 = 0
1 - abs(x - y) = 0
";

const TRIG_SYSTEM: &str = "\
vars: x1, x2
domain: * in [-5, 5]
2*(x2 - x1) + sin(2*x2) - sin(2*x1) - 1.2 = 0
cos(2*x1) - cos(2*x2) - 0.4 = 0
";

const INTERVAL10: &str = "\
vars: x1, x2, x3, x4, x5, x6, x7, x8, x9, x10
domain: * in [-30, 30]
x1 - 0.25428722 - 0.18324757*x4*x3*x9 = 0
x2 - 0.37842197 - 0.16275449*x1*x10*x6 = 0
x3 - 0.27162577 - 0.16955071*x1*x2*x10 = 0
x4 - 0.19807914 - 0.15585316*x7*x1*x6 = 0
x5 - 0.44166728 - 0.19950920*x7*x6*x3 = 0
x6 - 0.14654113 - 0.18922793*x8*x5*x10 = 0
x7 - 0.42937161 - 0.21180486*x2*x5*x8 = 0
x8 - 0.07056438 - 0.17081208*x1*x7*x6 = 0
x9 - 0.34504906 - 0.19612740*x10*x6*x8 = 0
x10 - 0.42651102 - 0.21466544*x4*x8*x1 = 0
";

const COMBUSTION10: &str = "\
vars: x1, x2, x3, x4, x5, x6, x7, x8, x9, x10
x2 + 2*x6 + x9 + 2*x10 = 1e-5
x3 + x8 = 3e-5
x1 + x3 + 2*x5 + 2*x8 + x9 + x10 = 5e-5
x4 + 2*x7 = 1e-5
0.5140437e-7*x5 = x1^2
0.1006932e-6*x6 = 2*x2^2
0.7816278e-15*x7 = x4^2
0.1496236e-6*x8 = x1*x3
0.6194411e-7*x9 = x1*x2
0.2089296e-14*x10 = x1*x2^2
";

/// The combustion system after substituting `x_i = 1e-5 z_i` and rescaling
/// each equation to unit leading coefficients.
const COMBUSTION10_SCALED: &str = "\
vars: z1, z2, z3, z4, z5, z6, z7, z8, z9, z10
z2 + 2*z6 + z9 + 2*z10 = 1
z3 + z8 = 3
z1 + z3 + 2*z5 + 2*z8 + z9 + z10 = 5
z4 + 2*z7 = 1
0.5140437e-2*z5 = z1^2
0.1006932e-1*z6 = 2*z2^2
0.7816278e-10*z7 = z4^2
0.1496236e-1*z8 = z1*z3
0.6194411e-2*z9 = z1*z2
0.2089296e-4*z10 = z1*z2^2
";

/// The last equation uses `x4` linearly so that `x4 = t − 2` solves it; with
/// the square the system has no real solution at `t = 0`.
const TIME_VARYING: &str = "\
vars: x1, x2, x3, x4
time: t in [0, 10]
ln(x1) - 1/(t + 1) = 0
x1*x2 - exp(1/(t + 1))*sin(t) = 0
x1^2 - sin(t)*x2 + x3 - 2 = 0
x1^2 - x2^2 + x3 + x4 - t = 0
";

/// The last equation exactly as printed, with `x4^2`.
pub const TIME_VARYING_AS_PRINTED: &str = "\
vars: x1, x2, x3, x4
time: t in [0, 10]
ln(x1) - 1/(t + 1) = 0
x1*x2 - exp(1/(t + 1))*sin(t) = 0
x1^2 - sin(t)*x2 + x3 - 2 = 0
x1^2 - x2^2 + x3 + x4^2 - t = 0
";

/// L-BFGS budget for the time-varying case; the loss keeps improving well
/// past the default 5000 iterations.
pub const TIME_VARYING_ITERS: usize = 20_000;

/// Newton starting point for the time-varying anchors.
pub const TIME_VARYING_HINT: [f64; 4] = [2.5, 0.0, -5.0, -2.0];

/// `x*(t)` for the time-varying system.
pub fn time_varying_exact(t: f64) -> Vec<f64> {
    let e = (1.0 / (t + 1.0)).exp();
    vec![e, t.sin(), 2.0 - e * e + t.sin().powi(2), t - 2.0]
}

/// Published γ study on the single equation: `(γ, x, residual, seconds)`.
pub const GAMMA_TABLE: [(f64, f64, f64, f64); 7] = [
    (5.0, -10.50394063, 2.323479e-02, 9.5779),
    (1.0, -17.66053462, 1.537179e-02, 10.9315),
    (0.1, -16.91877944, 4.990269e-03, 0.8091),
    (0.01, -17.61766674, 1.202379e-04, 0.6413),
    (0.001, -17.61837379, 3.578146e-04, 0.3714),
    (0.0001, -17.61923255, 6.470036e-04, 0.4382),
    (0.00001, -17.61945523, 7.221054e-04, 0.4117),
];

/// Anchor used for the single-equation γ study and sweeps.
pub const SINGLE_EQ_ANCHOR: f64 = -15.0;

/// Published seed/anchor study on the absolute-value system:
/// `(seed, anchor, solution, residual)`.
pub const ABS_TABLE: [(u64, [f64; 2], [f64; 2], f64); 10] = [
    (1, [0.0, 0.0], [0.50168678, -0.50079411], 3.375783e-03),
    (1234, [0.0, 0.0], [-0.49992005, 0.50106249], 2.126111e-03),
    (1, [-5.0, 5.0], [-0.49983449, 0.49940003], 1.199607e-03),
    (1234, [-5.0, 5.0], [0.50019711, -0.49749038], 5.012977e-03),
    (1, [5.0, -5.0], [0.49686094, -0.49906324], 6.269144e-03),
    (1234, [5.0, -5.0], [-0.49860885, 0.49963823], 2.780499e-03),
    (1, [5.0, 5.0], [-0.49957557, 0.49940736], 1.185112e-03),
    (1234, [5.0, 5.0], [0.50001307, -0.50172158], 3.446114e-03),
    (1, [-5.0, -5.0], [-0.50065917, 0.50010156], 1.318759e-03),
    (1234, [-5.0, -5.0], [-0.50142112, 0.50019246], 2.844226e-03),
];

/// Published trigonometric-system solutions by method: `(method, point, per-equation residuals)`.
pub const TRIG_TABLE: [(&str, [f64; 2], [f64; 2]); 21] = [
    ("Newton", [0.15, 0.49], [-1.68e-03, 1.5e-02]),
    ("Secant", [0.15, 0.49], [-1.68e-03, 1.5e-02]),
    ("Broyden", [0.15, 0.49], [-1.68e-03, 1.5e-02]),
    ("Effati", [0.1575, 0.4970], [5.46e-03, 7.39e-03]),
    ("Evolutionary", [0.15772, 0.49458], [1.26e-03, 9.69e-04]),
    ("HANN-1", [0.15404579, 0.49054697], [3.20e-03, 8.68e-04]),
    ("HANN-1", [-2.9850282, -2.648330057], [2.17e-04, 5.26e-04]),
    ("HANN-1", [-2.46140343, -0.881259401], [5.81e-04, 6.67e-04]),
    ("HANN-1", [0.680151726, 2.259743585], [6.50e-04, 1.96e-04]),
    ("HANN-1", [3.29719883, 3.63507387], [7.36e-04, 3.89e-04]),
    ("HANN-1", [3.822020409, 5.401734489], [6.72e-04, 2.20e-04]),
    ("HANN-1", [-5.603113604, -4.023228239], [3.87e-04, 3.42e-04]),
    ("HANN-1", [6.440921995, 6.77761628], [1.01e-03, 1.48e-03]),
    ("HANN-2", [0.15680684, 0.49370563], [3.73e-04, 9.77e-05]),
    ("HANN-2", [-2.98500176, -2.64813161], [9.76e-05, 1.37e-05]),
    ("HANN-2", [-2.46132136, -0.88150516], [2.59e-04, 7.07e-05]),
    ("HANN-2", [0.68026611, 2.26008618], [2.47e-04, 8.11e-05]),
    ("HANN-2", [3.29856214, 3.63538272], [4.13e-04, 4.71e-04]),
    ("HANN-2", [3.82186076, 5.40167894], [2.51e-04, 7.65e-05]),
    ("HANN-2", [-5.60291107, -4.0230971], [2.67e-04, 6.48e-05]),
    ("HANN-2", [6.44014078, 6.77695557], [3.89e-04, 4.77e-04]),
];

/// Published refined points of the interval system with their residuals.
pub const INTERVAL_TABLE: [([f64; 10], f64); 9] = [
    (
        [
            -2.412220977, -2.290323698, -2.111011823, -2.221227578, -2.269731897, -2.66909418,
            -2.412273916, -2.581165424, -3.098083885, -2.544602352,
        ],
        9.36e-11,
    ),
    (
        [
            -2.068464124, 2.358431355, 2.102111246, 2.397098585, -2.418618802, 2.657862106,
            -2.566873252, 2.48082643, -2.515310589, -2.212241962,
        ],
        2.39e-13,
    ),
    (
        [
            -0.017212478, 0.410907113, 0.367100602, 10.06725143, -269.1777816, 14.44662791,
            -254.8257341, 10.89577516, -0.430031337, -0.025758793,
        ],
        3.88e-08,
    ),
    (
        [
            -0.014075949, 0.397708215, 0.298453759, 11.78783966, -314.0994619, 15.64990574,
            -337.5436885, 12.77344875, -0.444130318, -0.020424264,
        ],
        6.14e-07,
    ),
    (
        [
            -0.006496133, 0.358320826, 0.157988754, 14.77312841, -453.394766, 26.08755186,
            -551.9110857, 16.05172001, -1.109535738, -0.018833827,
        ],
        1.31e-08,
    ),
    (
        [
            0.257431972, 0.380809764, 0.279386975, 0.200718638, 0.444888448, 0.145833685,
            0.430201613, 0.073404607, 0.346064111, 0.427182476,
        ],
        1.41e-14,
    ),
    (
        [
            1.843705186, 1.969576487, 1.620416551, 2.085091918, 2.562787287, 2.419666215,
            2.716139943, 2.138655983, 2.569032396, 2.191674122,
        ],
        2.74e-12,
    ),
    (
        [
            2.06179032, -1.864657949, -1.402607323, -2.033457959, 2.385743371, -2.604983832,
            2.666905401, -2.375158355, 3.458373215, 2.56712054,
        ],
        6.64e-13,
    ),
    (
        [
            2.420875356, -1.961971859, -1.937699599, -1.998564649, 2.3727384, -2.276614347,
            2.395151577, -2.105137056, 2.903343349, 2.643858443,
        ],
        2.96e-09,
    ),
];

/// Published combustion runs: `(seed, constant initial coordinate, solution, residual)`.
pub const COMBUSTION_TABLE: [(u64, f64, [f64; 10], f64); 8] = [
    (
        1,
        0.0,
        [
            -0.00370259, 0.01767804, -0.13773655, -0.04282948, -0.10548795, -0.09386463,
            0.02095912, 0.13719451, -0.01115377, 0.08632501,
        ],
        1.682803e-02,
    ),
    (
        12,
        0.0,
        [
            0.03296258, -0.03012133, 0.03902607, -0.01410685, 0.10905272, 0.11717426, 0.00811038,
            -0.04010447, -0.22151589, 0.00964912,
        ],
        1.327700e-02,
    ),
    (
        123,
        0.0,
        [
            -0.00646666, -0.00452143, -0.06526272, 0.01582104, -0.01067824, 0.03911695,
            -0.00977146, 0.06610348, -0.01062654, -0.03195714,
        ],
        9.948402e-03,
    ),
    (
        9999,
        0.0,
        [
            -0.00878543, 0.01154406, -0.07431326, -0.02868609, 0.00917935, 0.14285328, 0.01244537,
            0.0769432, 0.12151023, -0.20886281,
        ],
        1.046578e-02,
    ),
    (
        1234,
        0.0,
        [
            0.00716163, -0.00465711, 0.13905826, 0.03587913, -0.00408339, -0.02581832,
            -0.02078766, -0.14286198, 0.23417293, -0.08840915,
        ],
        1.576982e-02,
    ),
    (
        1234,
        1.0,
        [
            -0.00247197, -0.02307291, 0.90155323, -0.01031309, 0.69216196, 0.98678727, 0.00684249,
            -0.90100766, 0.9914312, -1.471531,
        ],
        8.931228e-03,
    ),
    (
        1234,
        2.0,
        [
            -0.00017406, -0.0000842, 2.01570322, -0.02618407, 1.47928839, 1.94125993, 0.01338621,
            -2.01682465, 2.00679399, -2.94418104,
        ],
        6.449540e-03,
    ),
    (
        1234,
        -1.0,
        [
            0.00805636, -0.03060408, 0.95590331, -0.03854047, -0.67681669, -0.88533855,
            0.01934219, -0.95308232, 2.80243835, -0.50116689,
        ],
        2.010216e-02,
    ),
];

/// How a case chooses its starting points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Initials {
    /// Generated points, all trained with the case seed.
    Plan(SamplePlan),
    /// Explicit `(initial value, seed)` runs.
    Runs(Vec<(Vec<f64>, u64)>),
    /// Newton starting point for the anchors of a time-varying system.
    AnchorHint(Vec<f64>),
}

/// A point reported in the literature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublishedPoint {
    pub method: String,
    pub point: Vec<f64>,
    /// Per-equation residuals when published that way, otherwise one total.
    pub residuals: Vec<f64>,
}

impl PublishedPoint {
    fn new(method: impl Into<String>, point: &[f64], residuals: &[f64]) -> Self {
        Self {
            method: method.into(),
            point: point.to_vec(),
            residuals: residuals.to_vec(),
        }
    }

    pub fn is_hann(&self) -> bool {
        self.method.starts_with("HANN")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    /// Known roots of the system.
    pub roots: Vec<Vec<f64>>,
    /// Number of roots in the domain, when known.
    pub root_count: Option<usize>,
    /// Cluster count reported for the case's multistart.
    pub expected_clusters: Option<usize>,
    pub published: Vec<PublishedPoint>,
}

#[derive(Debug, Clone)]
pub struct BenchmarkCase {
    pub name: &'static str,
    pub title: &'static str,
    pub system: System,
    pub config: TrainConfig,
    pub initials: Initials,
    pub threshold: f64,
    pub filter: ClusterFilter,
    pub reference: Reference,
    /// Single anchor used by sweeps.
    pub sweep_anchor: Vec<f64>,
    pub exact: Option<fn(f64) -> Vec<f64>>,
}

impl BenchmarkCase {
    /// Replaces the single-equation grid by `n` equal sub-intervals.
    pub fn with_subintervals(mut self, n: usize) -> Result<Self> {
        match &mut self.initials {
            Initials::Plan(plan) if plan.scheme != Scheme::Lhs => {
                plan.count = n;
                Ok(self)
            }
            _ => Err(Error::Config(format!(
                "`{}` has no sub-interval grid",
                self.name
            ))),
        }
    }

    pub fn is_time_varying(&self) -> bool {
        self.system.time().is_some()
    }

    /// The `(initial value, seed)` pairs of the multistart.
    pub fn runs(&self) -> Result<Vec<(Vec<f64>, u64)>> {
        match &self.initials {
            Initials::Plan(plan) => Ok(plan
                .generate()?
                .into_iter()
                .map(|x| (x, self.config.seed))
                .collect()),
            Initials::Runs(runs) => Ok(runs.clone()),
            Initials::AnchorHint(_) => Err(Error::Config(format!(
                "`{}` is solved as a trajectory, not by multistart",
                self.name
            ))),
        }
    }
}

fn boxed(n: usize, lo: f64, hi: f64) -> Vec<Interval> {
    vec![Interval { lo, hi }; n]
}

fn system(source: &str) -> System {
    parse_system(source).expect("built-in system parses")
}

/// The registry entry for `name`.
pub fn builtin(name: &str) -> Result<BenchmarkCase> {
    let defaults = TrainConfig::default();
    let case = match name {
        "single-eq" => {
            let sys = system(SINGLE_EQ);
            let roots = scan_roots(|x| 1.0 / x - x.sin() + 1.0, -40.0, 0.0, 1_000_000, 1e-12);
            BenchmarkCase {
                name: "single-eq",
                title: "1/x - sin(x) + 1 = 0 on (-40, 0)",
                initials: Initials::Plan(SamplePlan {
                    scheme: Scheme::MidpointGrid,
                    count: 32,
                    bounds: sys.domain().to_vec(),
                    seed: defaults.seed,
                }),
                filter: ClusterFilter {
                    max_residual: None,
                    within: Some(sys.domain().to_vec()),
                },
                system: sys,
                config: defaults,
                threshold: 4.66e-2,
                reference: Reference {
                    roots: roots.into_iter().map(|r| vec![r]).collect(),
                    root_count: Some(13),
                    expected_clusters: Some(13),
                    published: GAMMA_TABLE
                        .iter()
                        .map(|(g, x, r, _)| PublishedPoint::new(format!("HANN-1 gamma={g}"), &[*x], &[*r]))
                        .collect(),
                },
                sweep_anchor: vec![SINGLE_EQ_ANCHOR],
                exact: None,
            }
        }
        "abs-system" => BenchmarkCase {
            name: "abs-system",
            title: "x^2 - y^2 = 0, 1 - |x - y| = 0 on [-15, 15]^2",
            system: system(ABS_SYSTEM),
            initials: Initials::Plan(SamplePlan {
                scheme: Scheme::MidpointGrid,
                count: 7,
                bounds: boxed(2, -15.0, 15.0),
                seed: defaults.seed,
            }),
            config: defaults,
            threshold: 3.54e-2,
            filter: ClusterFilter::default(),
            reference: Reference {
                roots: vec![vec![0.5, -0.5], vec![-0.5, 0.5]],
                root_count: Some(2),
                expected_clusters: Some(2),
                published: ABS_TABLE
                    .iter()
                    .map(|(s, x0, x, r)| {
                        PublishedPoint::new(format!("HANN-1 seed={s} x0={x0:?}"), x, &[*r])
                    })
                    .collect(),
            },
            sweep_anchor: vec![0.0, 0.0],
            exact: None,
        },
        "trig-system" => BenchmarkCase {
            name: "trig-system",
            title: "two-link inverse kinematics, trigonometric, on [-5, 5]^2",
            system: system(TRIG_SYSTEM),
            initials: Initials::Plan(SamplePlan {
                scheme: Scheme::RandomInCell,
                count: 10,
                bounds: boxed(2, -5.0, 5.0),
                seed: defaults.seed,
            }),
            config: defaults,
            threshold: 1.08e-2,
            filter: ClusterFilter {
                max_residual: Some(TRIG_MAX_RESIDUAL),
                within: None,
            },
            reference: Reference {
                expected_clusters: Some(8),
                published: TRIG_TABLE
                    .iter()
                    .map(|(m, x, r)| PublishedPoint::new(*m, x, r))
                    .collect(),
                ..Reference::default()
            },
            sweep_anchor: vec![0.0, 0.0],
            exact: None,
        },
        "interval10" => BenchmarkCase {
            name: "interval10",
            title: "ten-variable interval arithmetic benchmark on [-30, 30]^10",
            system: system(INTERVAL10),
            initials: Initials::Plan(SamplePlan {
                scheme: Scheme::Lhs,
                count: 200,
                bounds: boxed(10, -30.0, 30.0),
                seed: defaults.seed,
            }),
            config: TrainConfig {
                gamma: 1e-4,
                n_collocation: 5,
                architecture: Architecture::new(2, 2),
                ..defaults
            },
            threshold: 1e-1,
            filter: ClusterFilter {
                max_residual: Some(1e-1),
                within: None,
            },
            reference: Reference {
                expected_clusters: Some(16),
                published: INTERVAL_TABLE
                    .iter()
                    .enumerate()
                    .map(|(i, (x, r))| PublishedPoint::new(format!("case {}", i + 1), x, &[*r]))
                    .collect(),
                ..Reference::default()
            },
            sweep_anchor: vec![0.0; 10],
            exact: None,
        },
        "combustion10" => BenchmarkCase {
            name: "combustion10",
            title: "combustion chemistry at 3000 C, ten species",
            system: system(COMBUSTION10),
            initials: Initials::Runs(
                COMBUSTION_TABLE
                    .iter()
                    .map(|(s, c, _, _)| (vec![*c; 10], *s))
                    .collect(),
            ),
            config: defaults,
            threshold: 1e-2,
            filter: ClusterFilter::default(),
            reference: Reference {
                published: COMBUSTION_TABLE
                    .iter()
                    .map(|(s, c, x, r)| {
                        PublishedPoint::new(format!("HANN-1 seed={s} x0={c}"), x, &[*r])
                    })
                    .collect(),
                ..Reference::default()
            },
            sweep_anchor: vec![0.0; 10],
            exact: None,
        },
        "time-varying" => BenchmarkCase {
            name: "time-varying",
            title: "four-variable time-varying system on t in [0, 10]",
            system: system(TIME_VARYING),
            initials: Initials::AnchorHint(TIME_VARYING_HINT.to_vec()),
            config: TrainConfig {
                optimizer: OptimizerConfig {
                    max_iters: TIME_VARYING_ITERS,
                    ..defaults.optimizer.clone()
                },
                ..defaults
            },
            threshold: 1e-2,
            filter: ClusterFilter::default(),
            reference: Reference::default(),
            sweep_anchor: TIME_VARYING_HINT.to_vec(),
            exact: Some(time_varying_exact),
        },
        other => return Err(Error::UnknownBenchmark(other.to_string())),
    };
    for root in &case.reference.roots {
        let r = case.system.residual_l1(root)?;
        assert!(r <= 1e-10, "reference root {root:?} of {name} has residual {r:e}");
    }
    Ok(case)
}

/// The combustion system in the variables `z = 1e5 x`.
pub fn combustion_scaled() -> BenchmarkCase {
    let mut case = builtin("combustion10").expect("registered");
    case.system = system(COMBUSTION10_SCALED);
    case.title = "combustion chemistry, scaled by 1e5";
    case
}

/// Every root of `f` on `(lo, hi)` visible as a sign change between `n`
/// uniformly spaced samples, refined by bisection to width `tol`.
///
/// Sign changes across poles are discarded by requiring a small value at the
/// refined point.
pub fn scan_roots(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize, tol: f64) -> Vec<f64> {
    let h = (hi - lo) / n as f64;
    let xs = (0..n).map(|k| lo + (k as f64 + 0.5) * h);
    let mut roots = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    for x in xs {
        let fx = f(x);
        if !fx.is_finite() {
            prev = None;
            continue;
        }
        if fx == 0.0 {
            roots.push(x);
        } else if let Some((a, fa)) = prev {
            if fa != 0.0 && fa.signum() != fx.signum() {
                let (mut a, mut b, mut fa) = (a, x, fa);
                while b - a > tol {
                    let m = 0.5 * (a + b);
                    let fm = f(m);
                    if fm == 0.0 {
                        a = m;
                        b = m;
                        break;
                    }
                    if fm.signum() == fa.signum() {
                        a = m;
                        fa = fm;
                    } else {
                        b = m;
                    }
                }
                let r = 0.5 * (a + b);
                if f(r).abs() < 1e-6 {
                    roots.push(r);
                }
            }
        }
        prev = Some((x, fx));
    }
    roots
}

/// `(x, f(x))` samples of a one-variable system over its domain.
pub fn curve_samples(sys: &System, n: usize) -> Result<Vec<(f64, f64)>> {
    if sys.dim() != 1 || sys.time().is_some() {
        return Err(Error::Config("curve samples need a one-variable system".into()));
    }
    let iv = sys.domain()[0];
    Ok((0..n)
        .map(|k| iv.lo + (k as f64 + 0.5) * iv.width() / n as f64)
        .filter_map(|x| sys.eval(&[x]).ok().map(|f| (x, f[0])))
        .collect())
}

/// Result of running a case end to end.
#[derive(Debug, Clone)]
pub enum CaseOutcome {
    Solutions(SolutionSet),
    Trajectory(TimeVaryingSolution),
}

/// Runs the multistart (or trajectory solve) of `case` with its own settings.
pub fn run_case(case: &BenchmarkCase, algorithm: Algorithm, jobs: Option<usize>) -> Result<CaseOutcome> {
    if let Initials::AnchorHint(hint) = &case.initials {
        let problem = TimeVaryingProblem::from_hint(case.system.clone(), Some(hint), &case.config)?;
        let exact = case.exact.map(|f| Box::new(f) as Box<dyn Fn(f64) -> Vec<f64>>);
        let sol = solve_time_varying(&problem, &case.config, DEFAULT_GRID, exact.as_deref())?;
        return Ok(CaseOutcome::Trajectory(sol));
    }
    let opts = MultiStart {
        algorithm,
        threshold: case.threshold,
        filter: case.filter.clone(),
        jobs,
    };
    Ok(CaseOutcome::Solutions(multistart_seeded(
        &case.system,
        &case.runs()?,
        &case.config,
        &opts,
    )?))
}

/// A reference point paired with a cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Match {
    pub label: String,
    pub point: Vec<f64>,
    pub distance: f64,
    pub published_residuals: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub cluster: usize,
    pub representative: Vec<f64>,
    pub residual: f64,
    pub equation_residuals: Vec<f64>,
    pub root: Option<Match>,
    pub competitor: Option<Match>,
    pub published_hann: Option<Match>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub case: String,
    pub rows: Vec<ComparisonRow>,
    pub matched: usize,
    pub published: Vec<PublishedPoint>,
}

fn nearest<'a>(
    p: &[f64],
    candidates: impl Iterator<Item = (String, &'a [f64], &'a [f64])>,
) -> Option<Match> {
    candidates
        .filter(|(_, q, _)| q.len() == p.len())
        .map(|(label, q, r)| Match {
            label,
            point: q.to_vec(),
            distance: max_norm_distance(p, q),
            published_residuals: r.to_vec(),
        })
        .filter(|m| m.distance <= MATCH_RADIUS)
        .min_by(|a, b| a.distance.total_cmp(&b.distance))
}

/// Pairs every cluster with the nearest known root, the nearest published
/// competitor point and the nearest published HANN point.
pub fn compare_reference(case: &BenchmarkCase, set: &SolutionSet) -> ComparisonReport {
    let reference = &case.reference;
    let rows: Vec<ComparisonRow> = set
        .clusters
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let p = &c.representative;
            let published = |hann: bool| {
                nearest(
                    p,
                    reference
                        .published
                        .iter()
                        .filter(move |q| q.is_hann() == hann)
                        .map(|q| (q.method.clone(), q.point.as_slice(), q.residuals.as_slice())),
                )
            };
            ComparisonRow {
                cluster: i,
                representative: p.clone(),
                residual: c.min_residual,
                equation_residuals: case.system.eval(p).map_or_else(
                    |_| vec![f64::INFINITY; case.system.n_equations()],
                    |f| f.iter().map(|v| v.abs()).collect(),
                ),
                root: nearest(
                    p,
                    reference
                        .roots
                        .iter()
                        .enumerate()
                        .map(|(k, r)| (format!("root {}", k + 1), r.as_slice(), &[][..])),
                ),
                competitor: published(false),
                published_hann: published(true),
            }
        })
        .collect();
    let matched = rows
        .iter()
        .filter(|r| r.root.is_some() || r.competitor.is_some() || r.published_hann.is_some())
        .count();
    ComparisonReport {
        case: case.name.to_string(),
        rows,
        matched,
        published: reference.published.clone(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    Gamma,
    Collocation,
    Architecture,
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gamma" => Ok(Self::Gamma),
            "collocation" | "nf" => Ok(Self::Collocation),
            "architecture" | "arch" => Ok(Self::Architecture),
            _ => Err(Error::Config(format!("unknown sweep axis `{s}`"))),
        }
    }
}

/// One setting along a sweep axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SweepValue {
    Real(f64),
    Count(usize),
    Layers { layers: usize, neurons: usize },
}

impl std::fmt::Display for SweepValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Real(v) => write!(f, "{v}"),
            Self::Count(n) => write!(f, "{n}"),
            Self::Layers { layers, neurons } => write!(f, "{layers}x{neurons}"),
        }
    }
}

impl SweepValue {
    /// Parses `text` as a value along `axis`; architectures are written `LxN`.
    pub fn parse(axis: SweepAxis, text: &str) -> Result<Self> {
        let bad = || Error::Config(format!("`{text}` is not a valid {axis:?} value"));
        let text = text.trim();
        match axis {
            SweepAxis::Gamma => text.parse().map(Self::Real).map_err(|_| bad()),
            SweepAxis::Collocation => text.parse().map(Self::Count).map_err(|_| bad()),
            SweepAxis::Architecture => {
                let (l, n) = text.split_once(['x', 'X']).ok_or_else(bad)?;
                Ok(Self::Layers {
                    layers: l.parse().map_err(|_| bad())?,
                    neurons: n.parse().map_err(|_| bad())?,
                })
            }
        }
    }

    fn apply(&self, axis: SweepAxis, cfg: &TrainConfig) -> Result<TrainConfig> {
        let mut cfg = cfg.clone();
        match (axis, self) {
            (SweepAxis::Gamma, Self::Real(g)) => cfg.gamma = *g,
            (SweepAxis::Collocation, Self::Count(n)) => cfg.n_collocation = *n,
            (SweepAxis::Architecture, Self::Layers { layers, neurons }) => {
                cfg.architecture = Architecture::new(*layers, *neurons)
            }
            _ => return Err(Error::Config(format!("value {self} does not fit axis {axis:?}"))),
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: SweepValue,
    /// Final residual per trial; `None` where the run failed.
    pub residuals: Vec<Option<f64>>,
    pub mean_residual: Option<f64>,
    pub stderr_residual: Option<f64>,
    #[serde(skip)]
    pub times: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub case: String,
    pub axis: SweepAxis,
    pub seeds: Vec<u64>,
    pub rows: Vec<SweepRow>,
}

/// Mean and standard error of the mean (zero for a single sample).
pub fn mean_stderr(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Some((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Some((mean, (var / n).sqrt()))
}

/// One training run of `case` under `cfg`: a homotopy run from the sweep
/// anchor, or the trajectory solve for a time-varying case (scored by the
/// mean grid residual).
pub fn single_run(case: &BenchmarkCase, cfg: &TrainConfig) -> Result<f64> {
    if let Initials::AnchorHint(hint) = &case.initials {
        let problem = TimeVaryingProblem::from_hint(case.system.clone(), Some(hint), cfg)?;
        let sol = solve_time_varying(&problem, cfg, DEFAULT_GRID, None)?;
        let r = sol.trajectory.residual_l1();
        return Ok(r.iter().sum::<f64>() / r.len() as f64);
    }
    let out = hann1(&case.system, &case.sweep_anchor, cfg)?;
    if out.is_usable() {
        Ok(out.residual)
    } else {
        Err(Error::Config(out.message.unwrap_or_else(|| "run failed".into())))
    }
}

/// Runs `trials` seeds (`case seed + k`) for every value; failed cells are
/// recorded as missing and the sweep carries on.
pub fn sweep(
    case: &BenchmarkCase,
    axis: SweepAxis,
    values: &[SweepValue],
    trials: usize,
    jobs: Option<usize>,
) -> Result<SweepReport> {
    if trials == 0 {
        return Err(Error::Config("a sweep needs at least one trial".into()));
    }
    let configs: Vec<TrainConfig> = values
        .iter()
        .map(|v| v.apply(axis, &case.config))
        .collect::<Result<_>>()?;
    let seeds: Vec<u64> = (0..trials as u64).map(|k| case.config.seed + k).collect();
    let cells: Vec<(usize, u64)> = (0..values.len())
        .flat_map(|i| seeds.iter().map(move |&s| (i, s)))
        .collect();
    let outcomes: Vec<(Option<f64>, f64)> = worker_pool(jobs)?.install(|| {
        cells
            .par_iter()
            .map(|&(i, seed)| {
                let start = Instant::now();
                let r = single_run(case, &configs[i].with_seed(seed)).ok();
                (r, start.elapsed().as_secs_f64())
            })
            .collect()
    });
    let rows = values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let cell = &outcomes[i * trials..(i + 1) * trials];
            let residuals: Vec<Option<f64>> = cell.iter().map(|(r, _)| *r).collect();
            let ok: Vec<f64> = residuals.iter().flatten().copied().collect();
            let stats = mean_stderr(&ok);
            SweepRow {
                value: v.clone(),
                residuals,
                mean_residual: stats.map(|s| s.0),
                stderr_residual: stats.map(|s| s.1),
                times: cell.iter().map(|(_, t)| *t).collect(),
            }
        })
        .collect();
    Ok(SweepReport {
        case: case.name.to_string(),
        axis,
        seeds,
        rows,
    })
}

impl SweepReport {
    /// `value,trials,ok,mean_residual,stderr_residual,mean_time,stderr_time`;
    /// missing statistics are left empty.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "value,trials,ok,mean_residual,stderr_residual,mean_time,stderr_time")?;
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:e}"));
        for row in &self.rows {
            let ok = row.residuals.iter().flatten().count();
            let time = mean_stderr(&row.times);
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                row.value,
                row.residuals.len(),
                ok,
                opt(row.mean_residual),
                opt(row.stderr_residual),
                opt(time.map(|t| t.0)),
                opt(time.map(|t| t.1)),
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_has_all_names() {
        for name in NAMES {
            assert_eq!(builtin(name).unwrap().name, name);
        }
        assert!(matches!(builtin("nope"), Err(Error::UnknownBenchmark(_))));
    }

    #[test]
    fn interval10_settings() {
        let c = builtin("interval10").unwrap();
        assert_eq!(c.config.architecture, Architecture::new(2, 2));
        assert_eq!(c.config.n_collocation, 5);
        assert_eq!(c.config.gamma, 1e-4);
        let runs = c.runs().unwrap();
        assert_eq!(runs.len(), 200);
        assert!(runs.iter().all(|(x, _)| x.iter().all(|v| v.abs() <= 30.0)));
    }

    #[test]
    fn single_eq_reference() {
        let c = builtin("single-eq").unwrap();
        assert_eq!(c.reference.root_count, Some(13));
        assert_eq!(c.reference.roots.len(), 13);
        assert_eq!(c.runs().unwrap().len(), 32);
        assert_eq!(c.threshold, 4.66e-2);
        let c2 = c.with_subintervals(40).unwrap();
        assert_eq!(c2.runs().unwrap().len(), 40);
    }

    #[test]
    fn abs_roots_exact() {
        let c = builtin("abs-system").unwrap();
        for r in &c.reference.roots {
            assert_eq!(c.system.residual_l1(r).unwrap(), 0.0);
        }
        assert_eq!(c.runs().unwrap().len(), 49);
    }

    #[test]
    fn trig_runs_in_cells() {
        let c = builtin("trig-system").unwrap();
        let runs = c.runs().unwrap();
        assert_eq!(runs.len(), 100);
        assert!(runs.iter().all(|(_, s)| *s == 1234));
    }

    #[test]
    fn combustion_rows() {
        let c = builtin("combustion10").unwrap();
        let runs = c.runs().unwrap();
        let seeds: Vec<u64> = runs.iter().map(|r| r.1).collect();
        assert_eq!(seeds, vec![1, 12, 123, 9999, 1234, 1234, 1234, 1234]);
        assert_eq!(runs[7].0, vec![-1.0; 10]);
    }

    #[test]
    fn scaled_combustion_agrees() {
        let raw = builtin("combustion10").unwrap();
        let scaled = combustion_scaled();
        let z: Vec<f64> = (1..=10).map(|i| 0.3 * i as f64).collect();
        let x: Vec<f64> = z.iter().map(|v| v * 1e-5).collect();
        let fr = raw.system.eval(&x).unwrap();
        let fs = scaled.system.eval(&z).unwrap();
        let scales = [1e-5, 1e-5, 1e-5, 1e-5, 1e-10, 1e-10, 1e-10, 1e-10, 1e-10, 1e-15];
        for i in 0..10 {
            assert!((fr[i] - scales[i] * fs[i]).abs() <= 1e-12 * scales[i] * (1.0 + fs[i].abs()));
        }
    }

    #[test]
    fn time_varying_exact_solution() {
        let c = builtin("time-varying").unwrap();
        for k in 0..=20 {
            let t = 0.5 * k as f64;
            let r = c.system.residual_l1_at(&time_varying_exact(t), t).unwrap();
            assert!(r < 1e-12, "t = {t}: {r:e}");
        }
        let x0 = time_varying_exact(0.0);
        let e = std::f64::consts::E;
        assert_eq!(x0, vec![e, 0.0, 2.0 - e * e, -2.0]);
    }

    #[test]
    fn printed_time_varying_has_no_real_anchor() {
        let printed = parse_system(TIME_VARYING_AS_PRINTED).unwrap();
        let e = std::f64::consts::E;
        let f = printed.eval_at(&[e, 0.0, 2.0 - e * e, 0.0], 0.0).unwrap();
        assert!(f[..3].iter().all(|v| v.abs() < 1e-12));
        assert!((f[3] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn scan_finds_simple_roots() {
        let r = scan_roots(|x| (x - 0.3) * (x + 0.7), -1.0, 1.0, 1000, 1e-13);
        assert_eq!(r.len(), 2);
        assert!((r[0] + 0.7).abs() < 1e-12 && (r[1] - 0.3).abs() < 1e-12);
        assert!(scan_roots(|x| 1.0 / x, -1.0, 1.0, 1001, 1e-12).is_empty());
    }

    #[test]
    fn stderr_of_one_trial_is_zero() {
        assert_eq!(mean_stderr(&[3.0]), Some((3.0, 0.0)));
        let (m, s) = mean_stderr(&[1.0, 3.0]).unwrap();
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-15);
        assert_eq!(mean_stderr(&[]), None);
    }

    #[test]
    fn sweep_values_parse() {
        assert_eq!(
            SweepValue::parse(SweepAxis::Architecture, "4x40").unwrap(),
            SweepValue::Layers { layers: 4, neurons: 40 }
        );
        assert_eq!(SweepValue::parse(SweepAxis::Gamma, "0.01").unwrap(), SweepValue::Real(0.01));
        assert!(SweepValue::parse(SweepAxis::Collocation, "1.5").is_err());
        assert!(SweepValue::Real(0.0).apply(SweepAxis::Gamma, &TrainConfig::default()).is_err());
    }

    #[test]
    fn empty_set_has_no_matches() {
        let c = builtin("trig-system").unwrap();
        let set = SolutionSet::from_results(Vec::new(), c.threshold, ClusterFilter::default(), Vec::new());
        let report = compare_reference(&c, &set);
        assert!(report.rows.is_empty());
        assert_eq!(report.matched, 0);
        assert_eq!(report.published.len(), 21);
    }
}
