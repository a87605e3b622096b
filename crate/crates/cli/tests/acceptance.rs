//! End-to-end acceptance checks, one PASS/FAIL line each.
//!
//! Run all with `cargo test --release --test acceptance`, or a subset by
//! number: `cargo test --release --test acceptance -- 5 10 12`.

use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use hann_cli::{run, Cli};
use hann_core::autodiff::{loss, loss_and_grad};
use hann_core::bench::{self, builtin, run_case, CaseOutcome, SweepAxis, SweepValue};
use hann_core::hann::{
    hann1, hann2, hann2_with, max_norm_distance, newton_refine, residual_or_inf, Algorithm,
    TrainConfig,
};
use hann_core::sampling::{latin_hypercube, stratum};
use hann_core::{Architecture, HomotopyProblem, Interval, LossSpec, NetworkParams};

const HOMOTOPY_CASES: [&str; 5] = ["single-eq", "abs-system", "trig-system", "interval10", "combustion10"];

struct Verdict {
    pass: bool,
    soft: bool,
    detail: String,
}

impl Verdict {
    fn hard(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, soft: false, detail: detail.into() }
    }

    fn soft(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, soft: true, detail: detail.into() }
    }
}

type Check = fn() -> Verdict;

fn solutions(name: &str, algorithm: Algorithm) -> hann_core::hann::SolutionSet {
    match run_case(&builtin(name).unwrap(), algorithm, None).unwrap() {
        CaseOutcome::Solutions(set) => set,
        CaseOutcome::Trajectory(_) => unreachable!("{name} is a multistart case"),
    }
}

fn sci(values: &[f64]) -> String {
    let parts: Vec<String> = values.iter().map(|v| format!("{v:.2e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn nearest(point: &[f64], roots: &[Vec<f64>]) -> f64 {
    roots
        .iter()
        .map(|r| max_norm_distance(point, r))
        .fold(f64::INFINITY, f64::min)
}

fn root_count() -> Verdict {
    let case = builtin("single-eq").unwrap();
    let set = solutions("single-eq", Algorithm::Hann1);
    let far = set
        .clusters
        .iter()
        .map(|c| nearest(&c.representative, &case.reference.roots))
        .fold(0.0, f64::max);
    let worst = set.max_cluster_residual();
    Verdict::hard(
        set.clusters.len() == 13 && far <= 5e-2 && worst <= 2e-2,
        format!(
            "{} clusters, oracle roots {}, max distance to a root {far:.2e}, max residual {worst:.2e}",
            set.clusters.len(),
            case.reference.roots.len()
        ),
    )
}

fn exact_roots() -> Verdict {
    const N_M: usize = 2;
    let case = builtin("abs-system").unwrap();
    let set = solutions("abs-system", Algorithm::Hann1);
    let far = set
        .clusters
        .iter()
        .map(|c| nearest(&c.representative, &case.reference.roots))
        .fold(0.0, f64::max);
    let runs = case.runs().unwrap();
    let mut first = Vec::new();
    let mut second = Vec::new();
    for (r, (x0, seed)) in set.results.iter().zip(&runs) {
        let out = hann2_with(&case.system, x0, N_M, *seed, |x, s| {
            if s == *seed && x == x0.as_slice() {
                Ok(r.clone())
            } else {
                hann1(&case.system, x, &case.config.with_seed(s))
            }
        })
        .unwrap();
        first.push(residual_or_inf(&case.system, &r.x_final));
        second.push(residual_or_inf(&case.system, &out.x_final));
    }
    let (m1, m2) = (median(first), median(second));
    Verdict::hard(
        set.clusters.len() == 2 && far <= 5e-2 && m2 < m1,
        format!(
            "{} clusters, max distance to (±0.5, ∓0.5) {far:.2e}, median residual HANN-1 {m1:.2e} vs HANN-2(N_m={N_M}) {m2:.2e}",
            set.clusters.len()
        ),
    )
}

fn reduced(cfg: &TrainConfig) -> TrainConfig {
    let mut cfg = TrainConfig {
        architecture: Architecture::new(1, 10),
        n_collocation: 100,
        ..cfg.clone()
    };
    cfg.optimizer.max_iters = 300;
    cfg
}

fn hann2_dominance() -> Verdict {
    let mut violations = Vec::new();
    let mut compared = 0;
    for name in HOMOTOPY_CASES {
        let case = builtin(name).unwrap();
        let cfg = reduced(&case.config);
        for x0 in latin_hypercube(10, case.system.domain(), 99).unwrap() {
            let (Ok(a), Ok(b)) = (hann1(&case.system, &x0, &cfg), hann2(&case.system, &x0, 2, &cfg)) else {
                continue;
            };
            compared += 1;
            if !(b.residual <= a.residual) {
                violations.push(format!("{name} {:e} > {:e}", b.residual, a.residual));
            }
        }
    }
    Verdict::hard(
        violations.is_empty() && compared == 10 * HOMOTOPY_CASES.len(),
        format!("{compared} anchors compared, violations: {violations:?}"),
    )
}

fn trig_clusters() -> Verdict {
    let case = builtin("trig-system").unwrap();
    let set = solutions("trig-system", Algorithm::Hann1);
    let target = [0.157, 0.494];
    let hit = set
        .clusters
        .iter()
        .map(|c| (max_norm_distance(&c.representative, &target), c))
        .min_by(|a, b| a.0.total_cmp(&b.0));
    let (dist, per_eq) = match hit {
        Some((d, c)) => (d, case.system.eval(&c.representative).unwrap_or_default()),
        None => (f64::INFINITY, Vec::new()),
    };
    let per_eq_ok = !per_eq.is_empty() && per_eq.iter().all(|r| r.abs() <= 1e-2);
    Verdict::hard(
        set.clusters.len() >= 6 && dist <= 2e-2 && per_eq_ok,
        format!(
            "{} clusters, nearest to (0.157, 0.494) at {dist:.2e} with residuals {}",
            set.clusters.len(),
            sci(&per_eq)
        ),
    )
}

fn published_residuals() -> Verdict {
    let sys = builtin("interval10").unwrap().system;
    let mut ok = 0;
    let mut ratios = Vec::new();
    for (x, published) in bench::INTERVAL_TABLE {
        let r = sys.residual_l1(&x).unwrap();
        ratios.push(r / published);
        if r <= 10.0 * published {
            ok += 1;
        }
    }
    Verdict::hard(
        ok == bench::INTERVAL_TABLE.len(),
        format!("{ok}/9 within 10x, evaluated/published ratios {}", sci(&ratios)),
    )
}

fn newton_refiner() -> Verdict {
    let sys = builtin("interval10").unwrap().system;
    let noise_box = vec![Interval { lo: -1e-3, hi: 1e-3 }; 10];
    let noise = latin_hypercube(bench::INTERVAL_TABLE.len(), &noise_box, 6).unwrap();
    let mut converged = 0;
    let mut monotone = true;
    for ((x, _), e) in bench::INTERVAL_TABLE.iter().zip(&noise) {
        let start: Vec<f64> = x.iter().zip(e).map(|(a, b)| a + b).collect();
        let r0 = sys.residual_l1(&start).unwrap();
        let out = newton_refine(&sys, &start, 20, 1e-9);
        if out.residual <= 1e-9 {
            converged += 1;
        }
        monotone &= out.residual <= r0;
    }
    Verdict::hard(
        converged >= 7 && monotone,
        format!("{converged}/9 reach 1e-9 within 20 iterations, monotone: {monotone}"),
    )
}

fn interval_multistart() -> Verdict {
    let start = Instant::now();
    let set = solutions("interval10", Algorithm::Hann1);
    let good = set.clusters.iter().filter(|c| c.min_residual <= 1e-1).count();
    let secs = start.elapsed().as_secs_f64();
    Verdict::hard(
        good >= 10,
        format!("{good} clusters with residual <= 1e-1 from {} runs in {secs:.0} s", set.results.len()),
    )
}

fn combustion_rows() -> Verdict {
    let set = solutions("combustion10", Algorithm::Hann1);
    let residuals: Vec<f64> = set.results.iter().map(|r| r.residual).collect();
    Verdict::hard(
        residuals.len() == 8 && residuals.iter().all(|r| *r <= 5e-2),
        format!("residuals {}", sci(&residuals)),
    )
}

fn time_varying() -> Verdict {
    let start = Instant::now();
    let CaseOutcome::Trajectory(sol) = run_case(&builtin("time-varying").unwrap(), Algorithm::Hann1, None).unwrap()
    else {
        unreachable!()
    };
    let errors = sol.trajectory.max_errors().unwrap();
    let limits = [5e-2, 2e-2, 2e-2, 2e-2];
    let secs = start.elapsed().as_secs_f64();
    Verdict::hard(
        errors.iter().zip(limits).all(|(e, l)| *e <= l),
        format!(
            "max errors {} after {} iterations, {secs:.0} s",
            sci(&errors),
            sol.history.iterations()
        ),
    )
}

fn homotopy_identities() -> Verdict {
    let eps = f64::EPSILON;
    let mut worst = 0.0_f64;
    let mut checked = 0;
    for name in HOMOTOPY_CASES {
        let case = builtin(name).unwrap();
        let sys = &case.system;
        let anchors = latin_hypercube(100, sys.domain(), 10).unwrap();
        let points = latin_hypercube(100, sys.domain(), 11).unwrap();
        for (x0, x) in anchors.into_iter().zip(points) {
            let (Ok(f0), Ok(f)) = (sys.eval(&x0), sys.eval(&x)) else {
                continue;
            };
            let h = HomotopyProblem::new(sys.clone(), x0.clone(), case.config.gamma).unwrap();
            let h0 = h.eval(&x0, 0.0).unwrap();
            let h1 = h.eval(&x, 1.0).unwrap();
            for i in 0..f.len() {
                worst = worst.max(h0[i].abs() / (1.0 + f0[i].abs()));
                worst = worst.max((h1[i] - f[i]).abs() / (1.0 + f[i].abs()));
            }
            checked += 1;
        }
    }
    Verdict::hard(
        worst <= 4.0 * eps,
        format!("{checked} pairs, worst scaled deviation {:.2} eps", worst / eps),
    )
}

fn gradient_error(params: &NetworkParams, spec: &LossSpec, indices: &[usize]) -> f64 {
    let (_, grad) = loss_and_grad(params, spec).unwrap();
    let mut diff = 0.0;
    let mut norm = 0.0;
    for &k in indices {
        let theta = params.theta()[k];
        let h = 1e-6 * theta.abs().max(1.0);
        let mut plus = params.clone();
        plus.theta_mut()[k] = theta + h;
        let mut minus = params.clone();
        minus.theta_mut()[k] = theta - h;
        let fd = (loss(&plus, spec).unwrap() - loss(&minus, spec).unwrap()) / (2.0 * h);
        diff += (fd - grad[k]).powi(2);
        norm += grad[k].powi(2);
    }
    diff.sqrt() / norm.sqrt().max(f64::MIN_POSITIVE)
}

fn gradients() -> Verdict {
    let mut worst = (0.0_f64, String::new());
    for arch in [Architecture::new(2, 2), Architecture::new(4, 40)] {
        for name in bench::NAMES {
            let case = builtin(name).unwrap();
            let cfg = TrainConfig {
                architecture: arch.clone(),
                n_collocation: 50,
                ..case.config.with_seed(3)
            };
            let (spec, anchor) = if case.is_time_varying() {
                let bench::Initials::AnchorHint(hint) = &case.initials else { unreachable!() };
                let iv = case.system.time().unwrap().interval;
                let times = cfg.collocation().unwrap().iter().map(|u| iv.lo + u * iv.width()).collect();
                let anchor = hint.clone();
                (LossSpec::time_varying(case.system.clone(), anchor.clone(), times).unwrap(), anchor)
            } else {
                let anchor = case.sweep_anchor.clone();
                let h = HomotopyProblem::new(case.system.clone(), anchor.clone(), cfg.gamma).unwrap();
                (LossSpec::homotopy(h, cfg.collocation().unwrap()).unwrap(), anchor)
            };
            let mut params = cfg.init_params(&anchor).unwrap();
            let shift = 0.01;
            for v in params.theta_mut() {
                *v += shift;
            }
            let n = params.len();
            let indices: Vec<usize> = if n <= 64 { (0..n).collect() } else { (0..n).step_by(n / 60).collect() };
            let err = gradient_error(&params, &spec, &indices);
            if err > worst.0 {
                worst = (err, format!("{name} {arch}"));
            }
        }
    }
    Verdict::hard(worst.0 <= 1e-5, format!("worst relative error {:.2e} ({})", worst.0, worst.1))
}

fn exec(args: &[&str]) -> anyhow::Result<()> {
    let cli = Cli::try_parse_from(std::iter::once("hann").chain(args.iter().copied()))?;
    run(&cli, &mut std::io::sink())
}

fn determinism() -> Verdict {
    let unit = Interval { lo: 0.0, hi: 1.0 };
    let mut stratified = true;
    for count in [5, 50, 500, 1000] {
        let bounds = vec![unit; 3];
        let pts = latin_hypercube(count, &bounds, count as u64).unwrap();
        for d in 0..bounds.len() {
            let mut seen = vec![false; count];
            for p in &pts {
                seen[stratum(unit, count, p[d])] = true;
            }
            stratified &= seen.iter().all(|s| *s);
        }
    }
    let dir = tempfile::tempdir().unwrap();
    let mut summaries = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("run{k}"));
        exec(&[
            "bench", "abs-system", "--layers", "1", "--neurons", "8", "--nf", "50", "--max-iters", "200",
            "--seed", "21", "--out", out.to_str().unwrap(),
        ])
        .unwrap();
        summaries.push(std::fs::read(out.join("summary.json")).unwrap());
    }
    let identical = summaries[0] == summaries[1];
    Verdict::hard(
        stratified && identical,
        format!("stratified: {stratified}, byte-identical summaries: {identical}"),
    )
}

fn gamma_trend() -> Verdict {
    let case = builtin("single-eq").unwrap();
    let values = [SweepValue::Real(0.01), SweepValue::Real(5.0)];
    let report = bench::sweep(&case, SweepAxis::Gamma, &values, 5, None).unwrap();
    let medians: Vec<f64> = report
        .rows
        .iter()
        .map(|row| median(row.residuals.iter().map(|r| r.unwrap_or(f64::INFINITY)).collect()))
        .collect();
    Verdict::soft(
        medians[0] * 10.0 <= medians[1],
        format!("median residual gamma=0.01 {:.2e} vs gamma=5 {:.2e}", medians[0], medians[1]),
    )
}

fn main() -> ExitCode {
    let checks: [(&str, Check); 13] = [
        ("single-eq root count", root_count),
        ("abs-system exact roots", exact_roots),
        ("HANN-2 dominance", hann2_dominance),
        ("trig-system clusters", trig_clusters),
        ("interval10 published residuals", published_residuals),
        ("Newton refiner", newton_refiner),
        ("interval10 multistart", interval_multistart),
        ("combustion10 rows", combustion_rows),
        ("time-varying trajectory", time_varying),
        ("homotopy identities", homotopy_identities),
        ("gradient correctness", gradients),
        ("LHS stratification and determinism", determinism),
        ("gamma sweep trend", gamma_trend),
    ];
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut hard_failures = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let number = i + 1;
        if !selected.is_empty() && !selected.contains(&number) {
            continue;
        }
        let start = Instant::now();
        let v = check();
        let label = match (v.pass, v.soft) {
            (true, _) => "PASS",
            (false, true) => "FAIL (soft, warning only)",
            (false, false) => "FAIL",
        };
        if !v.pass && !v.soft {
            hard_failures += 1;
        }
        println!(
            "criterion {number:2} {label}: {name}: {} [{:.1} s]",
            v.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if hard_failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{hard_failures} criteria failed");
        ExitCode::FAILURE
    }
}
