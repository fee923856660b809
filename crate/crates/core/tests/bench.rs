use std::sync::Arc;

use hjb_rbf::bench::{
    benchmark_grid, fd_baseline, fd_solve, guo_problem, inf_sigma_sq, ratio_table, read_reports_csv, residual_check,
    run_benchmark, run_cell, run_sweep, sup_sigma_sq, write_ratio_csv, write_reports_csv, BenchError, BenchmarkConfig,
    Encoding, ErrorReport, ExactSolution, Scheme, SineSolution, SIGMA_MAX,
};
use hjb_rbf::geometry::TimeGrid;
use hjb_rbf::interp::GramSystem;
use hjb_rbf::kernel::build_kernel;
use hjb_rbf::solver::{HjbProblem, Jet, Nonlinearity};
use proptest::prelude::*;

fn grid_sup(y: f64, points: usize) -> f64 {
    (0..points)
        .map(|i| {
            let s = SIGMA_MAX * i as f64 / (points - 1) as f64;
            s * s * y
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

fn grid_inf(y: f64, points: usize) -> f64 {
    (0..points)
        .map(|i| {
            let s = SIGMA_MAX * i as f64 / (points - 1) as f64;
            s * s * y
        })
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn negative_value_contribution_by_grid_search() {
    // -(d/2) inf σ² z at d = 1, z = -1.
    let g = -0.5 * grid_inf(-1.0, 101);
    assert!((g - 1.0 / 50.0).abs() < 1e-15);
    assert!((-0.5 * inf_sigma_sq(-1.0) - g).abs() < 1e-15);
}

proptest! {
    #[test]
    fn closed_forms_match_grid_search(y in -50.0f64..50.0) {
        prop_assert!((sup_sigma_sq(y) - grid_sup(y, 1001)).abs() <= 1e-6);
        prop_assert!((inf_sigma_sq(y) - grid_inf(y, 1001)).abs() <= 1e-6);
    }

    #[test]
    fn encodings_agree_on_random_jets(
        z in -3.0f64..3.0,
        p in prop::collection::vec(-3.0f64..3.0, 2),
        h in prop::collection::vec(-3.0f64..3.0, 4),
    ) {
        let hess = [h[0], 0.5 * (h[1] + h[2]), 0.5 * (h[1] + h[2]), h[3]];
        for d in 1..=2 {
            let jet = Jet { t: 0.5, x: &[0.1, 0.2][..d], z, p: &p[..d], hess: if d == 1 { &hess[..1] } else { &hess } };
            let a = guo_problem(d, Encoding::Control).unwrap().nonlinearity.evaluate(&jet).unwrap();
            let b = guo_problem(d, Encoding::General).unwrap().nonlinearity.evaluate(&jet).unwrap();
            prop_assert!((a - b).abs() <= 1e-15 * (1.0 + a.abs()));
        }
    }
}

struct Constant;

impl ExactSolution for Constant {
    fn dim(&self) -> usize {
        1
    }
    fn value(&self, _: f64, _: &[f64]) -> f64 {
        0.7
    }
    fn time_derivative(&self, _: f64, _: &[f64]) -> f64 {
        0.0
    }
    fn gradient(&self, _: f64, _: &[f64]) -> Vec<f64> {
        vec![0.0]
    }
    fn hessian(&self, _: f64, _: &[f64]) -> Vec<f64> {
        vec![0.0]
    }
}

fn zero_problem(dim: usize) -> HjbProblem {
    HjbProblem {
        dim,
        horizon: 1.0,
        terminal: Arc::new(|x| (1.0 + x.iter().sum::<f64>()).sin()),
        nonlinearity: Nonlinearity::zero(),
    }
}

#[test]
fn residual_controls() {
    assert_eq!(residual_check(&zero_problem(1), &Constant, 100, 1).unwrap(), 0.0);
    let r = residual_check(&zero_problem(1), &SineSolution { dim: 1 }, 100, 1).unwrap();
    assert!(r > 0.5);
}

#[test]
fn terminal_only_run_is_pure_interpolation_error() {
    let config = BenchmarkConfig::new(1, 0, Scheme::Interp).unwrap();
    let report = run_cell(&config, 17);
    let colloc = benchmark_grid(1, 17, 4).unwrap();
    let gs = Arc::new(GramSystem::assemble(build_kernel(1, 4).unwrap(), colloc).unwrap());
    let values: Vec<f64> = gs.colloc().points().iter().map(|x| (1.0 + x[0]).sin()).collect();
    let ip = gs.interpolate(&values).unwrap();
    let pts = hjb_rbf::geometry::sobol_points(1, 10).unwrap();
    let max = pts
        .iter()
        .map(|x| (ip.eval(x).unwrap() - (1.0 + x[0]).sin()).abs())
        .fold(0.0, f64::max);
    assert_eq!(report.max_error, max);
}

#[test]
fn more_time_steps_do_not_hurt_at_large_n() {
    let coarse = run_benchmark(1, 256, &[200], Scheme::Interp, 10).unwrap();
    let fine = run_benchmark(1, 4096, &[200], Scheme::Interp, 10).unwrap();
    assert!(fine[0].max_error <= 1.05 * coarse[0].max_error);
}

#[test]
fn shape_on_the_long_time_grid() {
    let r = run_benchmark(1, 4096, &[33, 129], Scheme::Interp, 10).unwrap();
    assert!(r[0].max_error - r[1].max_error > 0.1 * r[0].max_error);
}

#[test]
fn reports_are_consistent() {
    let reports = run_benchmark(1, 64, &[9, 17, 33], Scheme::Interp, 10).unwrap();
    for r in &reports {
        assert!(r.failure.is_none());
        assert!(r.max_error >= 0.0 && r.rms_error <= r.max_error);
        assert!(r.delta_x > 0.0 && r.radius > 0.0);
    }
    let d2 = run_benchmark(2, 8, &[20], Scheme::Interp, 100).unwrap();
    // 20 points become a 5 x 5 grid.
    assert_eq!(d2[0].n_points, 25);
    assert!(d2[0].rms_error <= d2[0].max_error);
}

#[test]
fn failures_are_recorded_not_fatal() {
    let mut config = BenchmarkConfig::new(2, 4, Scheme::Interp).unwrap();
    config.tau = 40;
    let reports = run_sweep(&config, &[9, 16]).unwrap();
    assert_eq!(reports.len(), 2);
    assert!(reports.iter().all(|r| r.failure.is_some() && r.max_error.is_nan()));
    assert_eq!(
        run_sweep(&BenchmarkConfig { dim: 3, ..config }, &[8]).unwrap_err(),
        BenchError::UnsupportedDimension(3)
    );
}

#[test]
fn fd_keeps_data_without_nonlinearity() {
    let nodes: Vec<f64> = (0..11).map(|i| -1.0 + 0.2 * i as f64).collect();
    let tg = TimeGrid::uniform(1.0, 10).unwrap();
    let v = fd_solve(&zero_problem(1), &nodes, &tg).unwrap();
    assert!(v.iter().all(|row| row == &v[10]));
    let bent = [0.0, 0.1, 0.3];
    assert_eq!(
        fd_solve(&zero_problem(1), &bent, &tg).unwrap_err(),
        BenchError::NotUniformGrid
    );
}

#[test]
fn fd_heat_equation_converges_in_time() {
    // -∂_t v - (σ²/2) v_xx = 0 with σ = 1/5 and a sine vanishing at the ghost nodes.
    let nodes: Vec<f64> = (0..49).map(|i| -1.0 + 2.0 * i as f64 / 48.0).collect();
    let h = nodes[1] - nodes[0];
    let (left, length) = (nodes[0] - h, 50.0 * h);
    let k = 3.0 * std::f64::consts::PI / length;
    let problem = HjbProblem {
        dim: 1,
        horizon: 1.0,
        terminal: Arc::new(move |x| (k * (x[0] - left)).sin()),
        nonlinearity: Nonlinearity::General(Arc::new(|j| -0.5 * SIGMA_MAX * SIGMA_MAX * j.hess[0])),
    };
    let errs: Vec<f64> = [1usize, 4, 16]
        .iter()
        .map(|&n| {
            let tg = TimeGrid::uniform(1.0, n).unwrap();
            let v = fd_solve(&problem, &nodes, &tg).unwrap();
            let decay = (-0.5 * SIGMA_MAX * SIGMA_MAX * k * k).exp();
            v[0].iter()
                .zip(&nodes)
                .map(|(vi, x)| (vi - decay * (k * (x - left)).sin()).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
}

#[test]
fn fd_ratio_on_the_benchmark() {
    let fd = fd_baseline(256, 65, false);
    assert!(fd.failure.is_none());
    assert!(fd.rms_error.is_finite() && fd.rms_error <= fd.max_error);
}

fn report(n: usize, max: f64, rms: f64) -> ErrorReport {
    ErrorReport {
        scheme: "interp".into(),
        n_points: n,
        radius: 1.5,
        delta_x: 0.1,
        steps: 256,
        max_error: max,
        rms_error: rms,
        runtime_ms: 0.0,
        failure: None,
    }
}

#[test]
fn ratio_rows() {
    let rbf = vec![report(9, 0.1, 0.05), report(17, 0.2, 0.1)];
    let fd = vec![report(9, 0.2, 0.1), report(17, 0.2, 0.1)];
    let rows = ratio_table(&rbf, &fd).unwrap();
    assert_eq!((rows[0].max_ratio, rows[0].rms_ratio), (2.0, 2.0));
    assert_eq!((rows[1].max_ratio, rows[1].rms_ratio), (1.0, 1.0));
    let mut buf = Vec::new();
    write_ratio_csv(&rows, &mut buf).unwrap();
    assert_eq!(
        String::from_utf8(buf).unwrap(),
        "N,n,max_ratio,rms_ratio\n9,256,2e0,2e0\n17,256,1e0,1e0\n"
    );
}

#[test]
fn report_csv_round_trip() {
    let reports = vec![report(9, 0.125, 0.0625), report(17, 1.0 / 3.0, 0.1)];
    let mut buf = Vec::new();
    write_reports_csv(&reports, &mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("N,R,delta_x,max_error,rms_error,runtime_ms\n"));
    assert!(!text.contains('\r'));
    let back = read_reports_csv(buf.as_slice(), "interp", 256).unwrap();
    assert_eq!(back, reports);
    assert!(matches!(
        read_reports_csv("a,b\n1,2\n".as_bytes(), "x", 1),
        Err(BenchError::Malformed(_))
    ));
}
