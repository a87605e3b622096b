//! Command-line front end: argument definitions and the `run` entry point.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use hann_core::bench::{self, CaseOutcome, SweepAxis, SweepValue};
use hann_core::hann::{
    hann1_with_params, multistart, newton_refine, Algorithm, ClusterFilter, MultiStart,
    SolutionSet, TrainConfig,
};
use hann_core::homotopy::HomotopyProblem;
use hann_core::net::Architecture;
use hann_core::report::{
    write_clusters_csv, write_runs_csv, write_runs_jsonl, Document, Header, SetSummary, Timing,
};
use hann_core::sampling::{SamplePlan, Scheme};
use hann_core::timevarying::{solve_time_varying, TimeVaryingProblem, TimeVaryingSolution};
use hann_core::{parse_system, OptimizerConfig, System};

#[derive(Debug, Parser)]
#[command(name = "hann", version, about = "Homotopy-trained neural network solver for nonlinear systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve a system read from a file, from one or many initial values.
    Solve(SolveArgs),
    /// Run a built-in benchmark with its published settings.
    Bench(BenchArgs),
    /// Sweep one training setting over a built-in benchmark.
    Sweep(SweepArgs),
    /// Polish points with damped Newton iterations.
    Refine(RefineArgs),
    /// Train a trajectory for a system with a time axis.
    TimeVarying(TimeVaryingArgs),
    /// Path-existence quantities along a trained homotopy path.
    Diag(DiagArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AlgoArg {
    Hann1,
    Hann2,
    #[value(name = "hann1+refine")]
    Hann1Refine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    Midpoint,
    Random,
    Lhs,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Midpoint => Scheme::MidpointGrid,
            SchemeArg::Random => Scheme::RandomInCell,
            SchemeArg::Lhs => Scheme::Lhs,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OptimizerArg {
    Lbfgs,
    Adam,
}

/// Training settings; each overrides the matching field of the base configuration.
#[derive(Debug, Clone, Default, Args)]
pub struct TrainArgs {
    /// Hidden layers.
    #[arg(long)]
    pub layers: Option<usize>,
    /// Neurons per hidden layer.
    #[arg(long)]
    pub neurons: Option<usize>,
    /// Collocation points.
    #[arg(long)]
    pub nf: Option<usize>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, env = "HANN_SEED")]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub optimizer: Option<OptimizerArg>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Start the output bias at zero instead of at the anchor.
    #[arg(long)]
    pub zero_output_bias: bool,
}

impl TrainArgs {
    pub fn apply(&self, base: &TrainConfig) -> Result<TrainConfig> {
        let mut cfg = base.clone();
        if self.layers.is_some() || self.neurons.is_some() {
            let layers = self.layers.unwrap_or(cfg.architecture.hidden.len());
            let neurons = self
                .neurons
                .unwrap_or_else(|| cfg.architecture.hidden.first().copied().unwrap_or(40));
            cfg.architecture = Architecture::new(layers, neurons);
        }
        if let Some(n) = self.nf {
            cfg.n_collocation = n;
        }
        if let Some(g) = self.gamma {
            cfg.gamma = g;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = self.optimizer {
            let max_iters = cfg.optimizer.max_iters;
            cfg.optimizer = match o {
                OptimizerArg::Lbfgs => OptimizerConfig::default(),
                OptimizerArg::Adam => OptimizerConfig::adam(),
            };
            cfg.optimizer.max_iters = max_iters;
        }
        if let Some(m) = self.max_iters {
            cfg.optimizer.max_iters = m;
        }
        if self.zero_output_bias {
            cfg.anchor_output_bias = false;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Directory for artifacts; the summary goes to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the data behind the plots (curves, scatter, loss history).
    #[arg(long)]
    pub emit_plot_data: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    /// System definition in the equation language.
    #[arg(long)]
    pub file: PathBuf,
    #[arg(long, value_enum, default_value = "hann1")]
    pub algo: AlgoArg,
    /// Outer-loop budget for hann2.
    #[arg(long = "Nm", default_value_t = 50)]
    pub n_max: usize,
    /// Initial value as comma-separated coordinates; repeat for several.
    #[arg(long, value_delimiter = ';')]
    pub x0: Vec<String>,
    /// Generate initial values over the domain instead of `--x0`.
    #[arg(long, value_enum)]
    pub scheme: Option<SchemeArg>,
    /// Sub-intervals per dimension (grid schemes) or points (lhs).
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    /// Dedup threshold under the max-norm.
    #[arg(long, default_value_t = 1e-2)]
    pub threshold: f64,
    /// Leave runs above this residual out of clustering.
    #[arg(long)]
    pub max_residual: Option<f64>,
    /// Cluster only points inside the domain.
    #[arg(long)]
    pub in_domain: bool,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[command(flatten)]
    pub train: TrainArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    /// Benchmark name; see `--list`.
    pub name: Option<String>,
    /// Print the benchmark names and exit.
    #[arg(long)]
    pub list: bool,
    /// Sub-intervals per dimension for grid-based benchmarks.
    #[arg(long)]
    pub subintervals: Option<usize>,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long, value_enum, default_value = "hann1")]
    pub algo: AlgoArg,
    #[arg(long = "Nm", default_value_t = 50)]
    pub n_max: usize,
    /// Use the combustion system in the variables `z = 1e5 x`.
    #[arg(long)]
    pub scaled: bool,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[command(flatten)]
    pub train: TrainArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    pub name: String,
    #[arg(long)]
    pub axis: String,
    /// Comma-separated values; architectures are written `LxN`.
    #[arg(long, value_delimiter = ',', required = true)]
    pub values: Vec<String>,
    #[arg(long, default_value_t = 3)]
    pub trials: usize,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[command(flatten)]
    pub train: TrainArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct RefineArgs {
    #[arg(long)]
    pub file: PathBuf,
    /// Points to polish, comma-separated coordinates; repeat for several.
    #[arg(long, value_delimiter = ';', required = true)]
    pub x0: Vec<String>,
    #[arg(long, default_value_t = 50)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-14)]
    pub tol: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct TimeVaryingArgs {
    #[arg(long)]
    pub file: PathBuf,
    /// Values at the start of the interval, used as given.
    #[arg(long, conflicts_with = "hint")]
    pub anchors: Option<String>,
    /// Newton starting point for the values at the start of the interval.
    #[arg(long)]
    pub hint: Option<String>,
    /// Points in the evaluation grid.
    #[arg(long, default_value_t = hann_core::timevarying::DEFAULT_GRID)]
    pub grid: usize,
    #[command(flatten)]
    pub train: TrainArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct DiagArgs {
    #[arg(long)]
    pub file: PathBuf,
    #[arg(long)]
    pub x0: String,
    /// Values of `t` at which to evaluate, evenly spaced in `[0, 1]`.
    #[arg(long, default_value_t = 11)]
    pub points: usize,
    #[command(flatten)]
    pub train: TrainArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_point(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .with_context(|| format!("`{v}` is not a number"))
        })
        .collect()
}

fn read_system(path: &Path) -> Result<System> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    parse_system(&text).with_context(|| format!("{}", path.display()))
}

fn algorithm(algo: AlgoArg, n_max: usize) -> Algorithm {
    match algo {
        AlgoArg::Hann1 => Algorithm::Hann1,
        AlgoArg::Hann2 => Algorithm::Hann2 { n_max },
        AlgoArg::Hann1Refine => Algorithm::Hann1Refine,
    }
}

/// Writes `text` to `dir/name`, creating the directory.
fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, bytes).with_context(|| format!("cannot write {}", path.display()))
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

/// Summary to stdout, or the full artifact set to `--out`.
fn emit_set(
    out: &mut dyn Write,
    output: &OutputArgs,
    header: Header,
    set: &SolutionSet,
    extra: Option<serde_json::Value>,
    total_seconds: f64,
    curve: Option<Vec<(f64, f64)>>,
) -> Result<()> {
    #[derive(Serialize)]
    struct Body<'a> {
        #[serde(flatten)]
        summary: SetSummary,
        #[serde(skip_serializing_if = "Option::is_none")]
        reference: Option<&'a serde_json::Value>,
    }
    let body = Body {
        summary: SetSummary::new(set),
        reference: extra.as_ref(),
    };
    let summary = Document::new(header.clone(), body).to_json()?;
    let Some(dir) = &output.out else {
        out.write_all(summary.as_bytes())?;
        return Ok(());
    };
    write_file(dir, "summary.json", summary.as_bytes())?;
    let mut log = Vec::new();
    write_runs_jsonl(&mut log, &header, &set.results)?;
    write_file(dir, "runs.jsonl", &log)?;
    let timing = Document::new(header, Timing::of_runs(total_seconds, &set.results)).to_json()?;
    write_file(dir, "timing.json", timing.as_bytes())?;
    write_file(dir, "runs.csv", &csv_bytes(|b| write_runs_csv(b, &set.results))?)?;
    write_file(dir, "clusters.csv", &csv_bytes(|b| write_clusters_csv(b, set))?)?;
    if output.emit_plot_data {
        if let Some(points) = curve {
            let mut s = String::from("x,f\n");
            for (x, f) in points {
                s.push_str(&format!("{x:e},{f:e}\n"));
            }
            write_file(dir, "curve.csv", s.as_bytes())?;
        }
        let mut s = String::from("index,iteration,loss\n");
        for (i, r) in set.results.iter().enumerate() {
            for (k, l) in r.loss_history.iter().enumerate() {
                s.push_str(&format!("{i},{k},{l:e}\n"));
            }
        }
        write_file(dir, "loss.csv", s.as_bytes())?;
    }
    writeln!(out, "{} clusters from {} runs; artifacts in {}", set.clusters.len(), set.results.len(), dir.display())?;
    Ok(())
}

#[derive(Serialize)]
struct SolveEcho<'a> {
    file: &'a Path,
    train: &'a TrainConfig,
    algorithm: Algorithm,
    initials: &'a [Vec<f64>],
    threshold: f64,
    filter: &'a ClusterFilter,
}

fn solve(args: &SolveArgs, out: &mut dyn Write) -> Result<()> {
    let sys = read_system(&args.file)?;
    let cfg = args.train.apply(&TrainConfig::default())?;
    let initials: Vec<Vec<f64>> = match (args.x0.is_empty(), args.scheme) {
        (false, Some(_)) => bail!("--x0 and --scheme are mutually exclusive"),
        (false, None) => args.x0.iter().map(|s| parse_point(s)).collect::<Result<_>>()?,
        (true, Some(s)) => SamplePlan {
            scheme: s.into(),
            count: args.count,
            bounds: sys.domain().to_vec(),
            seed: cfg.seed,
        }
        .generate()?,
        (true, None) => vec![sys.domain().iter().map(|iv| iv.midpoint()).collect()],
    };
    if let Some(bad) = initials.iter().find(|x| x.len() != sys.dim()) {
        bail!("initial value {bad:?} has {} coordinates, system has {} variables", bad.len(), sys.dim());
    }
    if !(args.threshold > 0.0) {
        bail!("--threshold must be positive");
    }
    let filter = ClusterFilter {
        max_residual: args.max_residual,
        within: args.in_domain.then(|| sys.domain().to_vec()),
    };
    let algo = algorithm(args.algo, args.n_max);
    let echo = SolveEcho {
        file: &args.file,
        train: &cfg,
        algorithm: algo,
        initials: &initials,
        threshold: args.threshold,
        filter: &filter,
    };
    let header = Header::new("solve", cfg.seed, &echo)?;
    let opts = MultiStart {
        algorithm: algo,
        threshold: args.threshold,
        filter,
        jobs: args.jobs,
    };
    let start = Instant::now();
    let set = multistart(&sys, &initials, &cfg, &opts)?;
    let curve = (sys.dim() == 1).then(|| bench::curve_samples(&sys, 4000)).transpose()?;
    emit_set(out, &args.output, header, &set, None, start.elapsed().as_secs_f64(), curve)
}

#[derive(Serialize)]
struct BenchEcho<'a> {
    benchmark: &'a str,
    scaled: bool,
    train: &'a TrainConfig,
    algorithm: Algorithm,
    initials: &'a bench::Initials,
    threshold: f64,
    filter: &'a ClusterFilter,
}

fn bench_cmd(args: &BenchArgs, out: &mut dyn Write) -> Result<()> {
    if args.list {
        for name in bench::NAMES {
            let case = bench::builtin(name)?;
            writeln!(out, "{name:<14} {}", case.title)?;
        }
        return Ok(());
    }
    let Some(name) = &args.name else {
        bail!("give a benchmark name or --list");
    };
    let mut case = if args.scaled {
        if name != "combustion10" {
            bail!("--scaled applies only to combustion10");
        }
        bench::combustion_scaled()
    } else {
        bench::builtin(name)?
    };
    if let Some(n) = args.subintervals {
        case = case.with_subintervals(n)?;
    }
    if let Some(t) = args.threshold {
        if !(t > 0.0) {
            bail!("--threshold must be positive");
        }
        case.threshold = t;
    }
    case.config = args.train.apply(&case.config)?;
    if let bench::Initials::Plan(plan) = &mut case.initials {
        plan.seed = case.config.seed;
    }
    let algo = algorithm(args.algo, args.n_max);
    let echo = BenchEcho {
        benchmark: case.name,
        scaled: args.scaled,
        train: &case.config,
        algorithm: algo,
        initials: &case.initials,
        threshold: case.threshold,
        filter: &case.filter,
    };
    let header = Header::new(format!("bench {}", case.name), case.config.seed, &echo)?;
    let start = Instant::now();
    match bench::run_case(&case, algo, args.jobs)? {
        CaseOutcome::Solutions(set) => {
            let comparison = serde_json::to_value(bench::compare_reference(&case, &set))?;
            let curve = (case.system.dim() == 1)
                .then(|| bench::curve_samples(&case.system, 4000))
                .transpose()?;
            emit_set(out, &args.output, header, &set, Some(comparison), start.elapsed().as_secs_f64(), curve)
        }
        CaseOutcome::Trajectory(sol) => emit_trajectory(out, &args.output, header, &sol),
    }
}

#[derive(Serialize)]
struct TrajectorySummary<'a> {
    initial_state: Vec<f64>,
    iterations: usize,
    stop: String,
    final_loss: f64,
    grid_points: usize,
    max_residual: f64,
    mean_residual: f64,
    max_errors: Option<Vec<f64>>,
    variables: &'a [String],
}

fn emit_trajectory(out: &mut dyn Write, output: &OutputArgs, header: Header, sol: &TimeVaryingSolution) -> Result<()> {
    let tr = &sol.trajectory;
    let r = tr.residual_l1();
    let summary = TrajectorySummary {
        initial_state: tr.states.first().cloned().unwrap_or_default(),
        iterations: sol.history.iterations(),
        stop: sol.history.stop.to_string(),
        final_loss: sol.history.final_loss(),
        grid_points: tr.times.len(),
        max_residual: r.iter().copied().fold(0.0, f64::max),
        mean_residual: r.iter().sum::<f64>() / r.len() as f64,
        max_errors: tr.max_errors(),
        variables: &tr.variables,
    };
    let text = Document::new(header.clone(), summary).to_json()?;
    let Some(dir) = &output.out else {
        out.write_all(text.as_bytes())?;
        return Ok(());
    };
    write_file(dir, "summary.json", text.as_bytes())?;
    write_file(dir, "trajectory.csv", &csv_bytes(|b| tr.write_csv(b))?)?;
    #[derive(Serialize)]
    struct Secs {
        total_seconds: f64,
    }
    let timing = Document::new(header, Secs { total_seconds: sol.wall_time }).to_json()?;
    write_file(dir, "timing.json", timing.as_bytes())?;
    if output.emit_plot_data {
        write_file(dir, "loss.csv", &csv_bytes(|b| sol.history.write_csv(b))?)?;
        let mut snap = Vec::new();
        sol.params.write_snapshot(&mut snap)?;
        write_file(dir, "params.txt", &snap)?;
    }
    writeln!(out, "trajectory on {} points; artifacts in {}", tr.times.len(), dir.display())?;
    Ok(())
}

fn sweep_cmd(args: &SweepArgs, out: &mut dyn Write) -> Result<()> {
    let mut case = bench::builtin(&args.name)?;
    case.config = args.train.apply(&case.config)?;
    let axis: SweepAxis = args.axis.parse()?;
    let values: Vec<SweepValue> = args
        .values
        .iter()
        .map(|v| SweepValue::parse(axis, v))
        .collect::<hann_core::Result<_>>()?;
    #[derive(Serialize)]
    struct Echo<'a> {
        benchmark: &'a str,
        train: &'a TrainConfig,
        axis: SweepAxis,
        values: &'a [SweepValue],
        trials: usize,
    }
    let echo = Echo {
        benchmark: case.name,
        train: &case.config,
        axis,
        values: &values,
        trials: args.trials,
    };
    let header = Header::new(format!("sweep {}", case.name), case.config.seed, &echo)?;
    let report = bench::sweep(&case, axis, &values, args.trials, args.jobs)?;
    let csv = csv_bytes(|b| report.write_csv(b))?;
    match &args.out {
        None => out.write_all(&csv)?,
        Some(dir) => {
            write_file(dir, "sweep.csv", &csv)?;
            write_file(dir, "summary.json", Document::new(header, &report).to_json()?.as_bytes())?;
            writeln!(out, "{} rows; artifacts in {}", report.rows.len(), dir.display())?;
        }
    }
    Ok(())
}

fn refine_cmd(args: &RefineArgs, out: &mut dyn Write) -> Result<()> {
    let sys = read_system(&args.file)?;
    let points: Vec<Vec<f64>> = args.x0.iter().map(|s| parse_point(s)).collect::<Result<_>>()?;
    if let Some(bad) = points.iter().find(|x| x.len() != sys.dim()) {
        bail!("point {bad:?} has {} coordinates, system has {} variables", bad.len(), sys.dim());
    }
    let results: Vec<_> = points
        .iter()
        .map(|p| newton_refine(&sys, p, args.max_iters, args.tol))
        .collect();
    #[derive(Serialize)]
    struct Echo<'a> {
        file: &'a Path,
        points: &'a [Vec<f64>],
        max_iters: usize,
        tol: f64,
    }
    let header = Header::new(
        "refine",
        0,
        &Echo {
            file: &args.file,
            points: &points,
            max_iters: args.max_iters,
            tol: args.tol,
        },
    )?;
    match &args.out {
        None => {
            let mut csv = Vec::new();
            write_runs_csv(&mut csv, &results)?;
            out.write_all(&csv)?;
        }
        Some(dir) => {
            let mut log = Vec::new();
            write_runs_jsonl(&mut log, &header, &results)?;
            write_file(dir, "runs.jsonl", &log)?;
            write_file(dir, "runs.csv", &csv_bytes(|b| write_runs_csv(b, &results))?)?;
            writeln!(out, "{} points refined; artifacts in {}", results.len(), dir.display())?;
        }
    }
    Ok(())
}

fn time_varying_cmd(args: &TimeVaryingArgs, out: &mut dyn Write) -> Result<()> {
    let sys = read_system(&args.file)?;
    let cfg = args.train.apply(&TrainConfig::default())?;
    let problem = match (&args.anchors, &args.hint) {
        (Some(a), _) => TimeVaryingProblem::new(sys, parse_point(a)?)?,
        (None, Some(h)) => TimeVaryingProblem::from_hint(sys, Some(&parse_point(h)?), &cfg)?,
        (None, None) => TimeVaryingProblem::from_hint(sys, None, &cfg)?,
    };
    #[derive(Serialize)]
    struct Echo<'a> {
        file: &'a Path,
        train: &'a TrainConfig,
        anchors: &'a [f64],
        grid: usize,
    }
    let header = Header::new(
        "time-varying",
        cfg.seed,
        &Echo {
            file: &args.file,
            train: &cfg,
            anchors: problem.anchors(),
            grid: args.grid,
        },
    )?;
    let sol = solve_time_varying(&problem, &cfg, args.grid, None)?;
    emit_trajectory(out, &args.output, header, &sol)
}

#[derive(Debug, Clone, Serialize)]
pub struct DiagRow {
    pub t: f64,
    pub x: Vec<f64>,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub condition: Option<f64>,
}

fn diag_cmd(args: &DiagArgs, out: &mut dyn Write) -> Result<()> {
    let sys = read_system(&args.file)?;
    let cfg = args.train.apply(&TrainConfig::default())?;
    let x0 = parse_point(&args.x0)?;
    if args.points < 2 {
        bail!("--points must be at least 2");
    }
    let hp = HomotopyProblem::new(sys.clone(), x0.clone(), cfg.gamma)?;
    let (run, params) = hann1_with_params(&sys, &x0, &cfg)?;
    let Some(params) = params else {
        bail!("training failed: {}", run.message.unwrap_or_default());
    };
    let mut rows = Vec::new();
    for k in 0..args.points {
        let t = k as f64 / (args.points - 1) as f64;
        let x = params.forward(t)?;
        let d = hp.diagnostic(&x, t)?;
        rows.push(DiagRow {
            t,
            x,
            sigma_min: d.sigma_min,
            sigma_max: d.sigma_max,
            condition: (!d.is_singular()).then_some(d.condition),
        });
    }
    let mut csv = String::from("t,sigma_min,sigma_max,condition\n");
    for r in &rows {
        let c = r.condition.map_or("inf".to_string(), |c| format!("{c:e}"));
        csv.push_str(&format!("{:e},{:e},{:e},{c}\n", r.t, r.sigma_min, r.sigma_max));
    }
    #[derive(Serialize)]
    struct Echo<'a> {
        file: &'a Path,
        train: &'a TrainConfig,
        x0: &'a [f64],
        points: usize,
    }
    let header = Header::new(
        "diag",
        cfg.seed,
        &Echo {
            file: &args.file,
            train: &cfg,
            x0: &x0,
            points: args.points,
        },
    )?;
    match &args.out {
        None => out.write_all(csv.as_bytes())?,
        Some(dir) => {
            write_file(dir, "diag.csv", csv.as_bytes())?;
            #[derive(Serialize)]
            struct Body<'a> {
                residual: f64,
                rows: &'a [DiagRow],
            }
            let body = Body {
                residual: run.residual,
                rows: &rows,
            };
            write_file(dir, "summary.json", Document::new(header, body).to_json()?.as_bytes())?;
            writeln!(out, "{} diagnostic rows; artifacts in {}", rows.len(), dir.display())?;
        }
    }
    Ok(())
}

/// Executes a parsed command line, writing human-facing output to `out`.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Solve(a) => solve(a, out),
        Command::Bench(a) => bench_cmd(a, out),
        Command::Sweep(a) => sweep_cmd(a, out),
        Command::Refine(a) => refine_cmd(a, out),
        Command::TimeVarying(a) => time_varying_cmd(a, out),
        Command::Diag(a) => diag_cmd(a, out),
    }
}
