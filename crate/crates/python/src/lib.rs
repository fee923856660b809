//! Python bindings for the Wendland kernel schemes.
//!
//! Vectors cross the boundary as plain lists of floats; matrices as lists of rows.

use std::sync::Arc;

use hjb_rbf::bench::{self, guo_problem, BenchmarkConfig, Encoding, EvalSet, Scheme, SineSolution};
use hjb_rbf::geometry::{self, CollocationSet, TimeGrid};
use hjb_rbf::interp::GramSystem;
use hjb_rbf::kernel::{format_rational, WendlandKernel};
use hjb_rbf::l1regress::{self, BudgetSchedule};
use hjb_rbf::solver::{self, RegressConfig, SchemeSolution};
use nalgebra::DMatrix;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn value_error(e: impl ToString) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// Normalized Wendland kernel `φ_{d,τ}` with support radius `support_scale`.
#[pyclass(name = "Kernel", frozen)]
struct PyKernel {
    inner: WendlandKernel,
}

#[pymethods]
impl PyKernel {
    #[new]
    #[pyo3(signature = (d, tau, support_scale=1.0))]
    fn new(d: usize, tau: usize, support_scale: f64) -> PyResult<Self> {
        let inner = WendlandKernel::new(d, tau)
            .and_then(|k| k.with_support_scale(support_scale))
            .map_err(value_error)?;
        Ok(PyKernel { inner })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn tau(&self) -> usize {
        self.inner.tau()
    }

    #[getter]
    fn nu(&self) -> usize {
        self.inner.nu()
    }

    #[getter]
    fn degree(&self) -> usize {
        self.inner.degree()
    }

    /// `(exact, float)` pairs of the normalized monomial coefficients.
    fn coefficients(&self) -> Vec<(String, f64)> {
        self.inner
            .normalized_rational_coeffs()
            .iter()
            .map(format_rational)
            .zip(self.inner.normalized_coeffs())
            .collect()
    }

    fn phi(&self, r: f64) -> PyResult<f64> {
        self.inner.phi(r).map_err(value_error)
    }

    fn phi1(&self, r: f64) -> PyResult<f64> {
        self.inner.phi1(r).map_err(value_error)
    }

    fn phi2(&self, r: f64) -> PyResult<f64> {
        self.inner.phi2(r).map_err(value_error)
    }

    fn eval(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.eval(&x).map_err(value_error)
    }

    fn gradient(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.gradient(&x).map_err(value_error)
    }

    fn hessian(&self, x: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        self.inner.hessian(&x).map(|h| rows(&h)).map_err(value_error)
    }

    fn __repr__(&self) -> String {
        format!(
            "Kernel(d={}, tau={}, support_scale={})",
            self.inner.dim(),
            self.inner.tau(),
            self.inner.support_scale()
        )
    }
}

/// Factored Gram matrix of a kernel on a collocation set in `[-R, R]^d`.
#[pyclass(name = "GramSystem", frozen)]
struct PyGramSystem {
    inner: Arc<GramSystem>,
}

#[pymethods]
impl PyGramSystem {
    #[new]
    fn new(kernel: &PyKernel, points: Vec<Vec<f64>>, box_radius: f64) -> PyResult<Self> {
        let colloc = CollocationSet::new(points, box_radius).map_err(value_error)?;
        let inner = GramSystem::assemble(kernel.inner.clone(), colloc).map_err(value_error)?;
        Ok(PyGramSystem { inner: Arc::new(inner) })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// Diagonal shift used to factor the Gram matrix; zero when none was needed.
    #[getter]
    fn jitter(&self) -> f64 {
        self.inner.jitter()
    }

    #[getter]
    fn fill_distance(&self) -> f64 {
        self.inner.colloc().fill_distance()
    }

    fn gram(&self) -> Vec<Vec<f64>> {
        rows(self.inner.gram())
    }

    fn interpolate(&self, values: Vec<f64>) -> PyResult<PyInterpolant> {
        let inner = self.inner.interpolate(&values).map_err(value_error)?;
        Ok(PyInterpolant { inner })
    }
}

#[pyclass(name = "Interpolant", frozen)]
struct PyInterpolant {
    inner: hjb_rbf::interp::Interpolant,
}

#[pymethods]
impl PyInterpolant {
    #[getter]
    fn alpha(&self) -> Vec<f64> {
        self.inner.alpha().to_vec()
    }

    fn eval(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.eval(&x).map_err(value_error)
    }

    fn eval_grad(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.eval_grad(&x).map_err(value_error)
    }

    fn eval_hess(&self, x: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        self.inner.eval_hess(&x).map(|h| rows(&h)).map_err(value_error)
    }
}

/// Sparse kernel expansion with intercept from an ℓ1-constrained fit.
#[pyclass(name = "RegressionModel", frozen)]
struct PyRegressionModel {
    inner: l1regress::RegressionModel,
}

#[pymethods]
impl PyRegressionModel {
    #[getter]
    fn gamma(&self) -> Vec<f64> {
        self.inner.gamma.clone()
    }

    #[getter]
    fn intercept(&self) -> f64 {
        self.inner.intercept
    }

    #[getter]
    fn budget(&self) -> f64 {
        self.inner.budget
    }

    #[getter]
    fn objective(&self) -> f64 {
        self.inner.objective
    }

    #[getter]
    fn gap_certificate(&self) -> f64 {
        self.inner.gap_certificate
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.inner.iterations
    }

    fn l1_norm(&self) -> f64 {
        self.inner.l1_norm()
    }

    fn predict(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.predict(&x).map_err(value_error)
    }

    fn predict_grad(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.predict_grad(&x).map_err(value_error)
    }
}

/// Fit `targets` at `samples` with kernels at `centers` under `‖γ‖₁ <= beta`,
/// certified to a duality gap of at most `tol²`.
#[pyfunction]
fn fit_regression(
    kernel: &PyKernel,
    samples: Vec<Vec<f64>>,
    centers: Vec<Vec<f64>>,
    targets: Vec<f64>,
    beta: f64,
    tol: f64,
) -> PyResult<PyRegressionModel> {
    let inner = l1regress::fit(
        &targets,
        &samples,
        Arc::new(centers),
        Arc::new(kernel.inner.clone()),
        beta,
        tol,
    )
    .map_err(value_error)?;
    Ok(PyRegressionModel { inner })
}

enum AnySolution {
    Interp(solver::InterpSolution),
    Regress(solver::RegressSolution),
}

impl AnySolution {
    fn get(&self) -> &dyn SchemeSolution {
        match self {
            AnySolution::Interp(s) => s,
            AnySolution::Regress(s) => s,
        }
    }
}

/// Discrete solution on the benchmark problem, indexed by time step.
#[pyclass(name = "Solution", frozen)]
struct PySolution {
    inner: AnySolution,
    points: Vec<Vec<f64>>,
}

#[pymethods]
impl PySolution {
    #[getter]
    fn times(&self) -> Vec<f64> {
        self.inner.get().time_grid().times().to_vec()
    }

    #[getter]
    fn points(&self) -> Vec<Vec<f64>> {
        self.points.clone()
    }

    /// `Δt / Δx²` of the run.
    #[getter]
    fn diffusion_number(&self) -> f64 {
        match &self.inner {
            AnySolution::Interp(s) => s.stability.diffusion_number,
            AnySolution::Regress(s) => s.stability.diffusion_number,
        }
    }

    fn eval(&self, k: usize, x: Vec<f64>) -> PyResult<f64> {
        self.inner.get().eval(k, &x).map_err(value_error)
    }

    fn eval_at_time(&self, t: f64, x: Vec<f64>) -> PyResult<f64> {
        self.inner.get().eval_at_time(t, &x).map_err(value_error)
    }

    fn nodal_values(&self, k: usize) -> PyResult<Vec<f64>> {
        self.inner.get().nodal_values(k).map_err(value_error)
    }
}

/// Solve the benchmark HJB problem on its tensor grid.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
#[pyo3(signature = (d, n, n_points, scheme="interp", beta0=100.0, h=1e-3, centers=None))]
fn solve_benchmark(
    py: Python<'_>,
    d: usize,
    n: usize,
    n_points: usize,
    scheme: &str,
    beta0: f64,
    h: f64,
    centers: Option<usize>,
) -> PyResult<PySolution> {
    let problem = guo_problem(d, Encoding::Control).map_err(value_error)?;
    let tau = bench::benchmark_tau(d).map_err(value_error)?;
    let colloc = bench::benchmark_grid(d, n_points, tau).map_err(value_error)?;
    let kernel = bench::benchmark_kernel(d).map_err(value_error)?;
    let tgrid = TimeGrid::uniform(problem.horizon, n).map_err(value_error)?;
    let points = colloc.points().to_vec();
    let inner = py.detach(|| -> PyResult<AnySolution> {
        match scheme {
            "interp" => {
                let gs = Arc::new(GramSystem::assemble(kernel, colloc).map_err(value_error)?);
                solver::solve_interp(&problem, &gs, &tgrid)
                    .map(AnySolution::Interp)
                    .map_err(value_error)
            }
            "regress" => {
                let config = RegressConfig {
                    centers: centers.unwrap_or(colloc.len()),
                    schedule: BudgetSchedule::logarithmic(beta0),
                    h,
                };
                solver::solve_regress(&problem, &kernel, &colloc, &tgrid, &config)
                    .map(AnySolution::Regress)
                    .map_err(value_error)
            }
            other => Err(PyValueError::new_err(format!("unknown scheme {other:?}"))),
        }
    })?;
    Ok(PySolution { inner, points })
}

#[pyclass(name = "ErrorReport", frozen, get_all)]
struct PyErrorReport {
    scheme: String,
    n_points: usize,
    radius: f64,
    delta_x: f64,
    steps: usize,
    max_error: f64,
    rms_error: f64,
    runtime_ms: f64,
    failure: Option<String>,
}

impl From<bench::ErrorReport> for PyErrorReport {
    fn from(r: bench::ErrorReport) -> Self {
        PyErrorReport {
            scheme: r.scheme,
            n_points: r.n_points,
            radius: r.radius,
            delta_x: r.delta_x,
            steps: r.steps,
            max_error: r.max_error,
            rms_error: r.rms_error,
            runtime_ms: r.runtime_ms,
            failure: r.failure,
        }
    }
}

#[pymethods]
impl PyErrorReport {
    fn __repr__(&self) -> String {
        format!(
            "ErrorReport(scheme={:?}, N={}, n={}, max={:e}, rms={:e})",
            self.scheme, self.n_points, self.steps, self.max_error, self.rms_error
        )
    }
}

/// Error sweep over `n_list` on the benchmark problem.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
#[pyo3(signature = (d, n, n_list, scheme="interp", eval_count=None, beta0=100.0, h=1e-3))]
fn run_benchmark(
    py: Python<'_>,
    d: usize,
    n: usize,
    n_list: Vec<usize>,
    scheme: &str,
    eval_count: Option<usize>,
    beta0: f64,
    h: f64,
) -> PyResult<Vec<PyErrorReport>> {
    let scheme = match scheme {
        "interp" => Scheme::Interp,
        "regress" => Scheme::Regress {
            centers: None,
            beta0,
            h,
        },
        other => return Err(PyValueError::new_err(format!("unknown scheme {other:?}"))),
    };
    let mut config = BenchmarkConfig::new(d, n, scheme).map_err(value_error)?;
    if let Some(count) = eval_count {
        config.eval = EvalSet::Sobol(count);
    }
    let reports = py.detach(|| bench::run_sweep(&config, &n_list)).map_err(value_error)?;
    Ok(reports.into_iter().map(Into::into).collect())
}

/// Explicit finite-difference baseline in one dimension.
#[pyfunction]
fn fd_baseline(py: Python<'_>, n: usize, n_points: usize) -> PyErrorReport {
    py.detach(|| bench::fd_baseline(n, n_points, true)).into()
}

/// Largest pointwise PDE residual of the exact benchmark solution.
#[pyfunction]
#[pyo3(signature = (d, samples=1000, seed=0))]
fn residual_check(d: usize, samples: usize, seed: u64) -> PyResult<f64> {
    let problem = guo_problem(d, Encoding::Control).map_err(value_error)?;
    bench::residual_check(&problem, &SineSolution { dim: d }, samples, seed).map_err(value_error)
}

/// First `count` Sobol points mapped to `[-1, 1]^d`.
#[pyfunction]
fn sobol_points(d: usize, count: usize) -> PyResult<Vec<Vec<f64>>> {
    geometry::sobol_points(d, count).map_err(value_error)
}

/// Collocation box radius used by the benchmark.
#[pyfunction]
fn benchmark_radius(d: usize, n_points: usize, tau: usize) -> PyResult<f64> {
    geometry::benchmark_radius(d, n_points, tau).map_err(value_error)
}

#[pymodule]
#[pyo3(name = "hjb_rbf")]
fn hjb_rbf_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyKernel>()?;
    m.add_class::<PyGramSystem>()?;
    m.add_class::<PyInterpolant>()?;
    m.add_class::<PyRegressionModel>()?;
    m.add_class::<PySolution>()?;
    m.add_class::<PyErrorReport>()?;
    m.add_function(wrap_pyfunction!(fit_regression, m)?)?;
    m.add_function(wrap_pyfunction!(solve_benchmark, m)?)?;
    m.add_function(wrap_pyfunction!(run_benchmark, m)?)?;
    m.add_function(wrap_pyfunction!(fd_baseline, m)?)?;
    m.add_function(wrap_pyfunction!(residual_check, m)?)?;
    m.add_function(wrap_pyfunction!(sobol_points, m)?)?;
    m.add_function(wrap_pyfunction!(benchmark_radius, m)?)?;
    Ok(())
}
