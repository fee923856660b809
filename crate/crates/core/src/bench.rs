//! Benchmark harness: the test problem with exact solution
//! `v(t, x) = sin(t + Σ x_i)` on `[0, 1]`, error sweeps over collocation
//! sizes, an explicit finite-difference baseline and ratio tables.
//!
//! The nonlinearity is
//!
//! ```text
//! F(t, x, z, p, X) = -(1/2) sup_{0<=σ<=1/5} σ² tr X + (1/d) Σ p_i - (d/2) inf_{0<=σ<=1/5} σ² z
//!                  = -(1/50) max(tr X, 0) + (1/d) Σ p_i + (d/50) max(-z, 0)
//! ```

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    benchmark_radius, default_eval_count, sobol_points, tensor_grid, CollocationSet, GeometryError, TimeGrid,
};
use crate::interp::{GramSystem, InterpError};
use crate::kernel::{build_kernel, KernelError, WendlandKernel};
use crate::l1regress::BudgetSchedule;
use crate::solver::{
    solve_interp, solve_regress, ControlForm, ControlSet, HjbProblem, Jet, Nonlinearity, RegressConfig, ScalarField,
    SchemeSolution, SolverError,
};

/// Upper end of the control interval for `σ`.
pub const SIGMA_MAX: f64 = 0.2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BenchError {
    #[error("benchmark supports d = 1 or 2 (got {0})")]
    UnsupportedDimension(usize),
    #[error("finite-difference baseline needs an equispaced one-dimensional grid")]
    NotUniformGrid,
    #[error("no matching report for N = {n_points}, n = {steps}")]
    KeyMismatch { n_points: usize, steps: usize },
    #[error("report table is malformed: {0}")]
    Malformed(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Interp(#[from] InterpError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

fn check_dim(dim: usize) -> Result<(), BenchError> {
    match dim {
        1 | 2 => Ok(()),
        _ => Err(BenchError::UnsupportedDimension(dim)),
    }
}

/// `sup_{0<=σ<=1/5} σ² y`.
pub fn sup_sigma_sq(y: f64) -> f64 {
    SIGMA_MAX * SIGMA_MAX * y.max(0.0)
}

/// `inf_{0<=σ<=1/5} σ² y`.
pub fn inf_sigma_sq(y: f64) -> f64 {
    -SIGMA_MAX * SIGMA_MAX * (-y).max(0.0)
}

fn guo_value(dim: usize, z: f64, drift_term: f64, trace: f64) -> f64 {
    -0.5 * sup_sigma_sq(trace) + drift_term - 0.5 * dim as f64 * inf_sigma_sq(z)
}

/// Which encoding of the benchmark nonlinearity to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Encoding {
    /// Drift `(1/d) 1`, diffusion `I`, Hamiltonian taking the closed-form sup.
    Control,
    /// `F(t, x, z, p, X)` written out directly.
    General,
}

fn terminal(dim: usize) -> ScalarField {
    Arc::new(move |x: &[f64]| {
        debug_assert_eq!(x.len(), dim);
        (1.0 + x.iter().sum::<f64>()).sin()
    })
}

/// The benchmark problem in control form.
pub fn guo_nonlinearity(dim: usize) -> Result<HjbProblem, BenchError> {
    guo_problem(dim, Encoding::Control)
}

pub fn guo_problem(dim: usize, encoding: Encoding) -> Result<HjbProblem, BenchError> {
    check_dim(dim)?;
    let nonlinearity = match encoding {
        Encoding::Control => {
            let identity: Vec<f64> = (0..dim * dim)
                .map(|i| if i % (dim + 1) == 0 { 1.0 } else { 0.0 })
                .collect();
            Nonlinearity::Control(ControlForm {
                drift: Arc::new(move |_, _| vec![1.0 / dim as f64; dim]),
                diffusion: Arc::new(move |_, _| identity.clone()),
                hamiltonian: Arc::new(move |a| guo_value(dim, a.z, a.drift_term, a.diffusion_term)),
                controls: ControlSet::ClosedForm(Vec::new()),
            })
        }
        Encoding::General => Nonlinearity::General(Arc::new(move |j: &Jet| {
            let trace: f64 = (0..dim).map(|i| j.hess[i * dim + i]).sum();
            let drift = j.p.iter().sum::<f64>() / dim as f64;
            guo_value(dim, j.z, drift, trace)
        })),
    };
    Ok(HjbProblem {
        dim,
        horizon: 1.0,
        terminal: terminal(dim),
        nonlinearity,
    })
}

/// A classical solution with analytic derivatives.
pub trait ExactSolution: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, t: f64, x: &[f64]) -> f64;
    fn time_derivative(&self, t: f64, x: &[f64]) -> f64;
    fn gradient(&self, t: f64, x: &[f64]) -> Vec<f64>;
    /// Row-major `d x d`.
    fn hessian(&self, t: f64, x: &[f64]) -> Vec<f64>;
}

/// `v(t, x) = sin(t + Σ x_i)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SineSolution {
    pub dim: usize,
}

impl ExactSolution for SineSolution {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, t: f64, x: &[f64]) -> f64 {
        (t + x.iter().sum::<f64>()).sin()
    }

    fn time_derivative(&self, t: f64, x: &[f64]) -> f64 {
        (t + x.iter().sum::<f64>()).cos()
    }

    fn gradient(&self, t: f64, x: &[f64]) -> Vec<f64> {
        vec![self.time_derivative(t, x); self.dim]
    }

    fn hessian(&self, t: f64, x: &[f64]) -> Vec<f64> {
        vec![-self.value(t, x); self.dim * self.dim]
    }
}

/// `max |-∂_t v + F(t, x, v, Dv, D²v)|` over `samples` seeded random points in
/// `[0, T] x [-1, 1]^d`.
pub fn residual_check(
    problem: &HjbProblem,
    exact: &dyn ExactSolution,
    samples: usize,
    seed: u64,
) -> Result<f64, SolverError> {
    if exact.dim() != problem.dim {
        return Err(SolverError::DimensionMismatch {
            problem: problem.dim,
            other: exact.dim(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let t = rng.gen_range(0.0..=problem.horizon);
        let x: Vec<f64> = (0..problem.dim).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let p = exact.gradient(t, &x);
        let hess = exact.hessian(t, &x);
        let f = problem.nonlinearity.evaluate(&Jet {
            t,
            x: &x,
            z: exact.value(t, &x),
            p: &p,
            hess: &hess,
        })?;
        worst = worst.max((-exact.time_derivative(t, &x) + f).abs());
    }
    Ok(worst)
}

/// Smoothness parameter used by the benchmark in each dimension.
pub fn benchmark_tau(dim: usize) -> Result<usize, BenchError> {
    match dim {
        1 => Ok(4),
        2 => Ok(15),
        _ => Err(BenchError::UnsupportedDimension(dim)),
    }
}

/// Tensor grid with `ceil(N^{1/d})` points per axis on `[-R, R]^d` using the
/// benchmark radius for the actual point count.
pub fn benchmark_grid(dim: usize, requested: usize, tau: usize) -> Result<CollocationSet, BenchError> {
    check_dim(dim)?;
    let per_axis = if dim == 1 {
        requested
    } else {
        (requested as f64).sqrt().ceil() as usize
    };
    let actual = per_axis.pow(dim as u32);
    let radius = benchmark_radius(dim, actual, tau)?;
    Ok(tensor_grid(dim, per_axis, radius)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Scheme {
    Interp,
    Regress {
        /// Number of centers; `None` uses every collocation point.
        centers: Option<usize>,
        beta0: f64,
        h: f64,
    },
}

impl Scheme {
    pub fn tag(&self) -> &'static str {
        match self {
            Scheme::Interp => "interp",
            Scheme::Regress { .. } => "regress",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalSet {
    /// First `count` Sobol points in `[-1, 1]^d`.
    Sobol(usize),
    /// The collocation points themselves.
    Collocation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub dim: usize,
    /// Number of time steps; `0` evaluates the terminal interpolant only.
    pub steps: usize,
    pub tau: usize,
    pub scheme: Scheme,
    pub eval: EvalSet,
    /// Write measured wall time; when false `runtime_ms` is `0`.
    pub timing: bool,
}

impl BenchmarkConfig {
    pub fn new(dim: usize, steps: usize, scheme: Scheme) -> Result<Self, BenchError> {
        Ok(BenchmarkConfig {
            dim,
            steps,
            tau: benchmark_tau(dim)?,
            scheme,
            eval: EvalSet::Sobol(default_eval_count(dim)),
            timing: true,
        })
    }
}

/// Errors of one run against the exact solution over the evaluation set and
/// every time index `0..=n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub scheme: String,
    pub n_points: usize,
    pub radius: f64,
    pub delta_x: f64,
    pub steps: usize,
    pub max_error: f64,
    pub rms_error: f64,
    pub runtime_ms: f64,
    /// Set when the run failed; errors are then NaN.
    pub failure: Option<String>,
}

impl ErrorReport {
    fn failed(scheme: &str, n_points: usize, steps: usize, err: impl ToString) -> Self {
        ErrorReport {
            scheme: scheme.to_string(),
            n_points,
            radius: f64::NAN,
            delta_x: f64::NAN,
            steps,
            max_error: f64::NAN,
            rms_error: f64::NAN,
            runtime_ms: 0.0,
            failure: Some(err.to_string()),
        }
    }
}

#[derive(Default)]
struct ErrorAccumulator {
    max: f64,
    sum_sq: f64,
    count: usize,
}

impl ErrorAccumulator {
    fn push(&mut self, e: f64) {
        let e = e.abs();
        // NaN must poison the maximum rather than be skipped by f64::max.
        self.max = if e.is_nan() || self.max.is_nan() {
            f64::NAN
        } else {
            self.max.max(e)
        };
        self.sum_sq += e * e;
        self.count += 1;
    }

    fn rms(&self) -> f64 {
        (self.sum_sq / self.count.max(1) as f64).sqrt()
    }
}

fn eval_points(config: &BenchmarkConfig, colloc: &CollocationSet) -> Result<Vec<Vec<f64>>, BenchError> {
    Ok(match config.eval {
        EvalSet::Sobol(count) => sobol_points(config.dim, count)?,
        EvalSet::Collocation => colloc.points().to_vec(),
    })
}

fn solution_errors(
    sol: &dyn SchemeSolution,
    exact: &dyn ExactSolution,
    points: &[Vec<f64>],
) -> Result<ErrorAccumulator, BenchError> {
    let mut acc = ErrorAccumulator::default();
    for (k, &t) in sol.time_grid().times().iter().enumerate() {
        for x in points {
            acc.push(sol.eval(k, x)? - exact.value(t, x));
        }
    }
    Ok(acc)
}

fn run_cell_inner(config: &BenchmarkConfig, requested: usize) -> Result<ErrorReport, BenchError> {
    let start = Instant::now();
    let problem = guo_nonlinearity(config.dim)?;
    let exact = SineSolution { dim: config.dim };
    let colloc = benchmark_grid(config.dim, requested, config.tau)?;
    let kernel = build_kernel(config.dim, config.tau)?;
    let points = eval_points(config, &colloc)?;
    let (radius, delta_x, n_points) = (colloc.box_radius(), colloc.fill_distance(), colloc.len());

    let acc = if config.steps == 0 {
        let gs = Arc::new(GramSystem::assemble(kernel, colloc)?);
        let values: Vec<f64> = gs.colloc().points().iter().map(|x| (problem.terminal)(x)).collect();
        let ip = gs.interpolate(&values)?;
        let mut acc = ErrorAccumulator::default();
        for x in &points {
            acc.push(ip.eval(x)? - exact.value(problem.horizon, x));
        }
        acc
    } else {
        let tgrid = TimeGrid::uniform(problem.horizon, config.steps)?;
        match &config.scheme {
            Scheme::Interp => {
                let gs = Arc::new(GramSystem::assemble(kernel, colloc)?);
                let sol = solve_interp(&problem, &gs, &tgrid)?;
                solution_errors(&sol, &exact, &points)?
            }
            Scheme::Regress { centers, beta0, h } => {
                let cfg = RegressConfig {
                    centers: centers.unwrap_or(n_points),
                    schedule: BudgetSchedule::logarithmic(*beta0),
                    h: *h,
                };
                let sol = solve_regress(&problem, &kernel, &colloc, &tgrid, &cfg)?;
                solution_errors(&sol, &exact, &points)?
            }
        }
    };
    Ok(ErrorReport {
        scheme: config.scheme.tag().to_string(),
        n_points,
        radius,
        delta_x,
        steps: config.steps,
        max_error: acc.max,
        rms_error: acc.rms(),
        runtime_ms: if config.timing {
            start.elapsed().as_secs_f64() * 1e3
        } else {
            0.0
        },
        failure: None,
    })
}

/// One sweep cell. Failures are returned as a report with NaN errors.
pub fn run_cell(config: &BenchmarkConfig, requested: usize) -> ErrorReport {
    run_cell_inner(config, requested)
        .unwrap_or_else(|e| ErrorReport::failed(config.scheme.tag(), requested, config.steps, e))
}

/// Runs every `N` of the list in order with the given configuration.
pub fn run_sweep(config: &BenchmarkConfig, n_list: &[usize]) -> Result<Vec<ErrorReport>, BenchError> {
    check_dim(config.dim)?;
    Ok(n_list.iter().map(|&n| run_cell(config, n)).collect())
}

/// Sweep with the default smoothness, `eval_count` Sobol points and timing.
pub fn run_benchmark(
    dim: usize,
    steps: usize,
    n_list: &[usize],
    scheme: Scheme,
    eval_count: usize,
) -> Result<Vec<ErrorReport>, BenchError> {
    let mut config = BenchmarkConfig::new(dim, steps, scheme)?;
    config.eval = EvalSet::Sobol(eval_count);
    run_sweep(&config, n_list)
}

/// Explicit Euler with central differences on an equispaced 1-d grid, zero
/// values outside the grid. Returns nodal values indexed by time index.
pub fn fd_solve(problem: &HjbProblem, nodes: &[f64], tgrid: &TimeGrid) -> Result<Vec<Vec<f64>>, BenchError> {
    if problem.dim != 1 || nodes.len() < 2 {
        return Err(BenchError::NotUniformGrid);
    }
    let h = (nodes[nodes.len() - 1] - nodes[0]) / (nodes.len() - 1) as f64;
    let uniform = nodes.windows(2).all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h.abs());
    if !(h > 0.0) || !uniform {
        return Err(BenchError::NotUniformGrid);
    }
    let n = tgrid.steps();
    let times = tgrid.times();
    let len = nodes.len();
    let mut values = vec![Vec::new(); n + 1];
    values[n] = nodes.iter().map(|&x| (problem.terminal)(&[x])).collect();
    for k in (0..n).rev() {
        let v = &values[k + 1];
        let dt = times[k + 1] - times[k];
        let t = times[k + 1];
        let mut next = Vec::with_capacity(len);
        for j in 0..len {
            let left = if j == 0 { 0.0 } else { v[j - 1] };
            let right = if j + 1 == len { 0.0 } else { v[j + 1] };
            let p = (right - left) / (2.0 * h);
            let xx = (right - 2.0 * v[j] + left) / (h * h);
            let f = problem.nonlinearity.evaluate(&Jet {
                t,
                x: &[nodes[j]],
                z: v[j],
                p: &[p],
                hess: &[xx],
            })?;
            next.push(v[j] - dt * f);
        }
        if next.iter().any(|v| !v.is_finite()) {
            return Err(SolverError::NonFinite { step: k }.into());
        }
        values[k] = next;
    }
    Ok(values)
}

fn fd_inner(steps: usize, requested: usize, timing: bool) -> Result<ErrorReport, BenchError> {
    let start = Instant::now();
    let tau = benchmark_tau(1)?;
    let problem = guo_nonlinearity(1)?;
    let exact = SineSolution { dim: 1 };
    let colloc = benchmark_grid(1, requested, tau)?;
    let nodes: Vec<f64> = colloc.points().iter().map(|p| p[0]).collect();
    let tgrid = TimeGrid::uniform(problem.horizon, steps)?;
    let values = fd_solve(&problem, &nodes, &tgrid)?;
    let mut acc = ErrorAccumulator::default();
    for (k, &t) in tgrid.times().iter().enumerate() {
        for (v, &x) in values[k].iter().zip(&nodes) {
            acc.push(v - exact.value(t, &[x]));
        }
    }
    Ok(ErrorReport {
        scheme: "fd".to_string(),
        n_points: nodes.len(),
        radius: colloc.box_radius(),
        delta_x: colloc.fill_distance(),
        steps,
        max_error: acc.max,
        rms_error: acc.rms(),
        runtime_ms: if timing {
            start.elapsed().as_secs_f64() * 1e3
        } else {
            0.0
        },
        failure: None,
    })
}

/// Finite-difference baseline for the 1-d benchmark on the same collocation
/// points, with errors measured on the grid itself.
pub fn fd_baseline(steps: usize, requested: usize, timing: bool) -> ErrorReport {
    fd_inner(steps, requested, timing).unwrap_or_else(|e| ErrorReport::failed("fd", requested, steps, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub n_points: usize,
    pub steps: usize,
    pub max_ratio: f64,
    pub rms_ratio: f64,
}

/// FD-over-RBF error ratios for every `(N, n)` key of `fd`; every key must
/// also appear in `rbf`.
pub fn ratio_table(rbf: &[ErrorReport], fd: &[ErrorReport]) -> Result<Vec<RatioRow>, BenchError> {
    let by_key: BTreeMap<(usize, usize), &ErrorReport> = rbf.iter().map(|r| ((r.n_points, r.steps), r)).collect();
    fd.iter()
        .map(|f| {
            let r = by_key.get(&(f.n_points, f.steps)).ok_or(BenchError::KeyMismatch {
                n_points: f.n_points,
                steps: f.steps,
            })?;
            Ok(RatioRow {
                n_points: f.n_points,
                steps: f.steps,
                max_ratio: f.max_error / r.max_error,
                rms_ratio: f.rms_error / r.rms_error,
            })
        })
        .collect()
}

/// Shortest round-trip representation; identical values always serialize to
/// identical bytes.
pub fn format_float(v: f64) -> String {
    format!("{v:e}")
}

const REPORT_HEADER: [&str; 6] = ["N", "R", "delta_x", "max_error", "rms_error", "runtime_ms"];

pub fn write_reports_csv<W: Write>(reports: &[ErrorReport], writer: W) -> Result<(), BenchError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    let io = |e: csv::Error| BenchError::Malformed(e.to_string());
    w.write_record(REPORT_HEADER).map_err(io)?;
    for r in reports {
        w.write_record([
            r.n_points.to_string(),
            format_float(r.radius),
            format_float(r.delta_x),
            format_float(r.max_error),
            format_float(r.rms_error),
            format_float(r.runtime_ms),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| BenchError::Malformed(e.to_string()))
}

/// Reads a report table; the table has no step column so `steps` and the
/// scheme tag are supplied by the caller.
pub fn read_reports_csv<R: Read>(reader: R, scheme: &str, steps: usize) -> Result<Vec<ErrorReport>, BenchError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header = rdr.headers().map_err(|e| BenchError::Malformed(e.to_string()))?.clone();
    if header.iter().ne(REPORT_HEADER) {
        return Err(BenchError::Malformed(format!("unexpected header {header:?}")));
    }
    rdr.records()
        .map(|rec| {
            let rec = rec.map_err(|e| BenchError::Malformed(e.to_string()))?;
            let num = |i: usize| -> Result<f64, BenchError> {
                rec[i]
                    .parse::<f64>()
                    .map_err(|e| BenchError::Malformed(format!("field {}: {e}", REPORT_HEADER[i])))
            };
            Ok(ErrorReport {
                scheme: scheme.to_string(),
                n_points: rec[0]
                    .parse()
                    .map_err(|e| BenchError::Malformed(format!("field N: {e}")))?,
                radius: num(1)?,
                delta_x: num(2)?,
                steps,
                max_error: num(3)?,
                rms_error: num(4)?,
                runtime_ms: num(5)?,
                failure: None,
            })
        })
        .collect()
}

pub fn write_ratio_csv<W: Write>(rows: &[RatioRow], writer: W) -> Result<(), BenchError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    let io = |e: csv::Error| BenchError::Malformed(e.to_string());
    w.write_record(["N", "n", "max_ratio", "rms_ratio"]).map_err(io)?;
    for r in rows {
        w.write_record([
            r.n_points.to_string(),
            r.steps.to_string(),
            format_float(r.max_ratio),
            format_float(r.rms_ratio),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| BenchError::Malformed(e.to_string()))
}

/// Kernel used by the benchmark in dimension `dim`.
pub fn benchmark_kernel(dim: usize) -> Result<WendlandKernel, BenchError> {
    Ok(build_kernel(dim, benchmark_tau(dim)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_jet_is_zero() {
        for d in 1..=2 {
            let p = guo_nonlinearity(d).unwrap();
            let zeros = vec![0.0; d * d];
            let f = p
                .nonlinearity
                .evaluate(&Jet {
                    t: 0.3,
                    x: &zeros[..d],
                    z: 0.0,
                    p: &zeros[..d],
                    hess: &zeros,
                })
                .unwrap();
            assert_eq!(f, 0.0);
        }
    }

    #[test]
    fn negative_value_term() {
        let p = guo_problem(1, Encoding::General).unwrap();
        let f = p
            .nonlinearity
            .evaluate(&Jet {
                t: 0.0,
                x: &[0.0],
                z: -1.0,
                p: &[0.0],
                hess: &[0.0],
            })
            .unwrap();
        assert!((f - 1.0 / 50.0).abs() < 1e-15);
    }

    #[test]
    fn unsupported_dimension() {
        assert_eq!(guo_nonlinearity(3).unwrap_err(), BenchError::UnsupportedDimension(3));
    }

    #[test]
    fn accumulator_rms_le_max() {
        let mut acc = ErrorAccumulator::default();
        for e in [0.1, -0.3, 0.2] {
            acc.push(e);
        }
        assert_eq!(acc.max, 0.3);
        assert!(acc.rms() <= acc.max);
    }

    #[test]
    fn ratio_identity_and_mismatch() {
        let r = ErrorReport {
            scheme: "interp".into(),
            n_points: 9,
            radius: 1.0,
            delta_x: 0.1,
            steps: 4,
            max_error: 0.5,
            rms_error: 0.25,
            runtime_ms: 0.0,
            failure: None,
        };
        let rows = ratio_table(std::slice::from_ref(&r), std::slice::from_ref(&r)).unwrap();
        assert_eq!((rows[0].max_ratio, rows[0].rms_ratio), (1.0, 1.0));
        let other = ErrorReport {
            n_points: 17,
            ..r.clone()
        };
        assert!(matches!(
            ratio_table(&[r], &[other]),
            Err(BenchError::KeyMismatch { .. })
        ));
    }
}
