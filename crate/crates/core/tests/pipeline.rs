use hann_core::hann::{
    hann1, hann1_with_params, multistart, newton_refine, solve_one, trained_point, Algorithm, ClusterFilter,
    MultiStart, RunStatus, TrainConfig,
};
use hann_core::sampling::{SamplePlan, Scheme};
use hann_core::timevarying::{solve_time_varying, TimeVaryingProblem};
use hann_core::{parse_system, Architecture, Interval, NetworkParams};

fn small() -> TrainConfig {
    let mut cfg = TrainConfig {
        architecture: Architecture::new(2, 8),
        n_collocation: 60,
        ..TrainConfig::default()
    };
    cfg.optimizer.max_iters = 400;
    cfg
}

#[test]
fn cubic_root_from_one_anchor() {
    let sys = parse_system("vars: x\nx^3 - 2*x - 5 = 0").unwrap();
    let out = hann1(&sys, &[3.0], &small()).unwrap();
    assert!((out.x_final[0] - 2.0945514815423265).abs() < 5e-2, "{:?}", out.x_final);
    let polished = newton_refine(&sys, &out.x_final, 50, 1e-14);
    assert!((polished.x_final[0] - 2.0945514815423265).abs() < 1e-12);
    assert_eq!(polished.status, RunStatus::Converged);
}

#[test]
fn refine_algorithm_is_never_worse_than_training() {
    let sys = parse_system("vars: x, y\nx^2 + y^2 - 4 = 0\nx - y = 0").unwrap();
    let cfg = small();
    let a = solve_one(&sys, &[1.0, 0.5], &cfg, Algorithm::Hann1).unwrap();
    let b = solve_one(&sys, &[1.0, 0.5], &cfg, Algorithm::Hann1Refine).unwrap();
    assert!(b.residual <= a.residual);
    assert!(b.residual < 1e-12);
}

#[test]
fn returned_params_reproduce_the_point() {
    let sys = parse_system("vars: x\nx - 3 = 0").unwrap();
    let (out, params) = hann1_with_params(&sys, &[0.0], &small()).unwrap();
    let params = params.unwrap();
    assert_eq!(trained_point(&params).unwrap(), out.x_final);

    let mut text = Vec::new();
    params.write_snapshot(&mut text).unwrap();
    let back = NetworkParams::read_snapshot(text.as_slice()).unwrap();
    assert_eq!(back, params);
}

#[test]
fn multistart_finds_both_roots_independent_of_threads() {
    let sys = parse_system("vars: x\ndomain: x in [-3, 3]\nx^2 - 1 = 0").unwrap();
    let plan = SamplePlan {
        scheme: Scheme::MidpointGrid,
        count: 4,
        bounds: sys.domain().to_vec(),
        seed: 1,
    };
    let initials = plan.generate().unwrap();
    let opts = |jobs| MultiStart {
        algorithm: Algorithm::Hann1Refine,
        threshold: 1e-3,
        filter: ClusterFilter::default(),
        jobs: Some(jobs),
    };
    let one = multistart(&sys, &initials, &small(), &opts(1)).unwrap();
    let two = multistart(&sys, &initials, &small(), &opts(2)).unwrap();
    assert_eq!(one.clusters, two.clusters);
    let mut roots: Vec<f64> = one.clusters.iter().map(|c| c.representative[0]).collect();
    roots.sort_by(f64::total_cmp);
    assert_eq!(roots.len(), 2);
    assert!((roots[0] + 1.0).abs() < 1e-10 && (roots[1] - 1.0).abs() < 1e-10);
}

#[test]
fn inadmissible_anchor_is_skipped_with_warning() {
    let sys = parse_system("vars: x\nln(x) = 0").unwrap();
    let opts = MultiStart {
        algorithm: Algorithm::Hann1,
        threshold: 1e-2,
        filter: ClusterFilter::default(),
        jobs: Some(1),
    };
    let set = multistart(&sys, &[vec![-1.0], vec![2.0]], &small(), &opts).unwrap();
    assert_eq!(set.results.len(), 1);
    assert_eq!(set.results[0].initial, vec![2.0]);
    assert_eq!(set.warnings.len(), 1);
}

#[test]
fn domain_filter_drops_outside_points() {
    let sys = parse_system("vars: x\ndomain: x in [0, 5]\nx^2 - 4 = 0").unwrap();
    let opts = MultiStart {
        algorithm: Algorithm::Hann1Refine,
        threshold: 1e-3,
        filter: ClusterFilter {
            max_residual: None,
            within: Some(vec![Interval { lo: 0.0, hi: 5.0 }]),
        },
        jobs: Some(1),
    };
    let set = multistart(&sys, &[vec![-1.5], vec![1.5]], &small(), &opts).unwrap();
    assert_eq!(set.clusters.len(), 1);
    assert!((set.clusters[0].representative[0] - 2.0).abs() < 1e-10);
}

#[test]
fn linear_trajectory() {
    let sys = parse_system("time: t in [0, 1]\nvars: x\nx - 2*t - 1 = 0").unwrap();
    let problem = TimeVaryingProblem::new(sys, vec![1.0]).unwrap();
    let sol = solve_time_varying(&problem, &small(), 21, Some(&|t: f64| vec![2.0 * t + 1.0])).unwrap();
    let err = sol.trajectory.max_errors().unwrap()[0];
    assert!(err < 1e-2, "{err}");
}
