use std::sync::Arc;

use hjb_rbf::bench::{benchmark_grid, guo_problem, run_benchmark, Encoding, ExactSolution, Scheme, SineSolution};
use hjb_rbf::geometry::{equispaced_grid, sobol_points, TimeGrid};
use hjb_rbf::interp::GramSystem;
use hjb_rbf::kernel::build_kernel;
use hjb_rbf::l1regress::BudgetSchedule;
use hjb_rbf::solver::{
    hjb_step_operator, nodal_nonlinearity, solve_interp, solve_regress, write_history_csv, ControlForm, ControlSet,
    HjbProblem, Nonlinearity, RegressConfig, SchemeSolution, SolverError,
};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn guo_system(dim: usize, n: usize) -> Arc<GramSystem> {
    let tau = if dim == 1 { 4 } else { 15 };
    Arc::new(GramSystem::assemble(build_kernel(dim, tau).unwrap(), benchmark_grid(dim, n, tau).unwrap()).unwrap())
}

#[test]
fn drift_term_is_interpolant_gradient() {
    let gs = Arc::new(GramSystem::assemble(build_kernel(1, 4).unwrap(), equispaced_grid(1, 15, 1.5).unwrap()).unwrap());
    let form = ControlForm {
        drift: Arc::new(|_, _| vec![1.0]),
        diffusion: Arc::new(|_, _| vec![0.0]),
        hamiltonian: Arc::new(|a| a.drift_term),
        controls: ControlSet::Finite(vec![vec![0.0]]),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let v: Vec<f64> = (0..15).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let terms = hjb_step_operator(&gs, &form, &[0.0], &v).unwrap();
    let ip = gs.interpolate(&v).unwrap();
    for (i, x) in gs.colloc().points().iter().enumerate() {
        assert!((terms.drift[i] - ip.eval_grad(x).unwrap()[0]).abs() < 1e-8);
        assert_eq!(terms.diffusion[i], 0.0);
    }
}

#[test]
fn step_terms_match_dense_operator_products() {
    let gs = Arc::new(GramSystem::assemble(build_kernel(2, 4).unwrap(), equispaced_grid(2, 36, 1.2).unwrap()).unwrap());
    let form = ControlForm {
        drift: Arc::new(|x, c| vec![c[0] + x[1], -x[0]]),
        diffusion: Arc::new(|x, c| {
            let s = 1.0 + x[0] * x[0];
            vec![c[0] * s, 0.3, 0.3, 1.0]
        }),
        hamiltonian: Arc::new(|a| a.drift_term + a.diffusion_term),
        controls: ControlSet::Finite(vec![vec![0.5]]),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let v: Vec<f64> = (0..36).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let control = [0.5];
    let terms = hjb_step_operator(&gs, &form, &control, &v).unwrap();
    let alpha = DVector::from_vec(gs.solve(&v).unwrap());
    let pts = gs.colloc().points();
    let mut drift = DVector::zeros(36);
    for l in 0..2 {
        let b: Vec<f64> = pts.iter().map(|x| (form.drift)(x, &control)[l]).collect();
        drift += gs.drift_matrix(&b, l).unwrap() * &alpha;
    }
    let mut diffusion = DVector::zeros(36);
    for m in 0..2 {
        for l in 0..2 {
            let a: Vec<f64> = pts.iter().map(|x| (form.diffusion)(x, &control)[m * 2 + l]).collect();
            diffusion += gs.diffusion_matrix(&a, m, l).unwrap() * &alpha;
        }
    }
    for i in 0..36 {
        assert!((terms.drift[i] - drift[i]).abs() < 1e-10);
        assert!((terms.diffusion[i] - diffusion[i]).abs() < 1e-9);
    }
}

#[test]
fn both_encodings_give_the_same_history() {
    for (dim, n, steps) in [(1, 33, 64), (2, 49, 16)] {
        let gs = guo_system(dim, n);
        let tg = TimeGrid::uniform(1.0, steps).unwrap();
        let a = solve_interp(&guo_problem(dim, Encoding::Control).unwrap(), &gs, &tg).unwrap();
        let b = solve_interp(&guo_problem(dim, Encoding::General).unwrap(), &gs, &tg).unwrap();
        for (va, vb) in a.history().iter().zip(b.history()) {
            for (x, y) in va.iter().zip(vb) {
                assert!((x - y).abs() <= 1e-9);
            }
        }
    }
}

#[test]
fn one_step_is_linear_in_the_increment() {
    let gs = guo_system(1, 33);
    let problem = guo_problem(1, Encoding::Control).unwrap();
    let tg = TimeGrid::uniform(1.0, 32).unwrap();
    let sol = solve_interp(&problem, &gs, &tg).unwrap();
    let k = 20;
    let t_next = tg.times()[k + 1];
    let f = nodal_nonlinearity(&problem, &gs, t_next, &sol.history()[k + 1]).unwrap();
    let ip_next = gs.interpolate(&sol.history()[k + 1]).unwrap();
    let ip_f = gs.interpolate(&f).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10 {
        let x = [rng.gen_range(-1.0..1.0)];
        let lhs = sol.eval(k, &x).unwrap();
        let rhs = ip_next.eval(&x).unwrap() - tg.dt() * ip_f.eval(&x).unwrap();
        assert!((lhs - rhs).abs() < 1e-9);
    }
}

#[test]
fn evaluation_at_nodes_far_away_and_gradients() {
    let gs = guo_system(1, 17);
    let tg = TimeGrid::uniform(1.0, 16).unwrap();
    let sol = solve_interp(&guo_problem(1, Encoding::Control).unwrap(), &gs, &tg).unwrap();
    for (j, x) in gs.colloc().points().iter().enumerate() {
        assert!((sol.eval(5, x).unwrap() - sol.history()[5][j]).abs() < 1e-12);
    }
    let far = gs.colloc().box_radius() + 2.0;
    assert_eq!(sol.eval(5, &[far]).unwrap(), 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let h = 1e-5;
    for _ in 0..10 {
        let k = rng.gen_range(0..=16);
        let x = rng.gen_range(-1.0..1.0);
        let fd = (sol.eval(k, &[x + h]).unwrap() - sol.eval(k, &[x - h]).unwrap()) / (2.0 * h);
        assert!((sol.eval_grad(k, &[x]).unwrap()[0] - fd).abs() < 1e-6);
    }
    assert!(matches!(
        sol.eval(0, &[0.0, 0.0]),
        Err(SolverError::DimensionMismatch { .. })
    ));
}

#[test]
fn benchmark_iterates_stay_bounded() {
    let problem = guo_problem(1, Encoding::Control).unwrap();
    let tg = TimeGrid::uniform(1.0, 256).unwrap();
    for n in [9, 33, 129] {
        let sol = solve_interp(&problem, &guo_system(1, n), &tg).unwrap();
        assert!(sol.history().iter().flatten().all(|v| v.abs() <= 2.0), "N = {n}");
        assert!(sol.stability.diffusion_number > 0.0);
    }
}

#[test]
fn refinement_beats_the_coarsest_grid() {
    let r = run_benchmark(1, 256, &[9, 65], Scheme::Interp, 10).unwrap();
    assert!(r[1].max_error < r[0].max_error);
}

#[test]
fn structure_checks_pass_for_the_benchmark() {
    for dim in 1..=2 {
        for enc in [Encoding::Control, Encoding::General] {
            guo_problem(dim, enc).unwrap().check_structure(300, 17).unwrap();
        }
    }
    let asym = HjbProblem {
        nonlinearity: Nonlinearity::Control(ControlForm {
            drift: Arc::new(|_, _| vec![0.0, 0.0]),
            diffusion: Arc::new(|_, _| vec![1.0, 0.5, 0.0, 1.0]),
            hamiltonian: Arc::new(|a| -a.diffusion_term.max(0.0)),
            controls: ControlSet::ClosedForm(vec![]),
        }),
        ..guo_problem(2, Encoding::Control).unwrap()
    };
    assert_eq!(asym.check_structure(5, 1), Err(SolverError::AsymmetricDiffusion));
}

fn regress_config(centers: usize) -> RegressConfig {
    RegressConfig {
        centers,
        schedule: BudgetSchedule::logarithmic(100.0),
        h: 1e-3,
    }
}

#[test]
fn regression_with_zero_nonlinearity_is_time_constant() {
    let colloc = equispaced_grid(1, 17, 2.0).unwrap();
    let problem = HjbProblem {
        dim: 1,
        horizon: 1.0,
        terminal: Arc::new(|x| (1.0 + x[0]).sin()),
        nonlinearity: Nonlinearity::zero(),
    };
    let tg = TimeGrid::uniform(1.0, 20).unwrap();
    let sol = solve_regress(
        &problem,
        &build_kernel(1, 4).unwrap(),
        &colloc,
        &tg,
        &regress_config(17),
    )
    .unwrap();
    let tol = 20.0 * 1e-3 * tg.dt();
    for x in sobol_points(1, 20).unwrap() {
        let end = sol.eval(20, &x).unwrap();
        for k in 0..20 {
            assert!((sol.eval(k, &x).unwrap() - end).abs() <= tol);
        }
    }
}

#[test]
fn telescoped_weights_match_the_model_sum() {
    let colloc = benchmark_grid(1, 17, 4).unwrap();
    let problem = guo_problem(1, Encoding::Control).unwrap();
    let tg = TimeGrid::uniform(1.0, 32).unwrap();
    let sol = solve_regress(
        &problem,
        &build_kernel(1, 4).unwrap(),
        &colloc,
        &tg,
        &regress_config(12),
    )
    .unwrap();
    assert_eq!(sol.step_models.len(), 32);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let h = 1e-5;
    for _ in 0..10 {
        let k = rng.gen_range(0..=32);
        let x = rng.gen_range(-1.0..1.0);
        let a = sol.eval(k, &[x]).unwrap();
        assert!((a - sol.eval_by_models(k, &[x]).unwrap()).abs() < 1e-12);
        let fd = (sol.eval(k, &[x + h]).unwrap() - sol.eval(k, &[x - h]).unwrap()) / (2.0 * h);
        assert!((sol.eval_grad(k, &[x]).unwrap()[0] - fd).abs() < 1e-6);
    }
    // Far from every center only intercepts remain.
    let far = colloc.box_radius() + 2.0;
    let intercepts = sol.terminal.intercept - tg.dt() * sol.step_models.iter().map(|m| m.intercept).sum::<f64>();
    assert!((sol.eval(0, &[far]).unwrap() - intercepts).abs() < 1e-12);
}

#[test]
fn regression_error_is_within_twice_the_interpolation_error() {
    let interp = run_benchmark(1, 256, &[33], Scheme::Interp, 10).unwrap();
    let regress = run_benchmark(
        1,
        256,
        &[33],
        Scheme::Regress {
            centers: None,
            beta0: 100.0,
            h: 1e-3,
        },
        10,
    )
    .unwrap();
    assert!(regress[0].rms_error <= 2.0 * interp[0].rms_error);
}

#[test]
fn history_csv_layout() {
    let gs = guo_system(1, 9);
    let tg = TimeGrid::uniform(1.0, 4).unwrap();
    let sol = solve_interp(&guo_problem(1, Encoding::Control).unwrap(), &gs, &tg).unwrap();
    let mut buf = Vec::new();
    write_history_csv(&sol, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "k,t,node_index,value");
    assert_eq!(lines.len(), 1 + 5 * 9);
    assert!(!text.contains('\r'));
    let last: Vec<&str> = lines[lines.len() - 1].split(',').collect();
    assert_eq!(last[0], "4");
    let exact = SineSolution { dim: 1 };
    let x = gs.colloc().points()[8][0];
    assert_eq!(last[3].parse::<f64>().unwrap(), exact.value(1.0, &[x]));
}
