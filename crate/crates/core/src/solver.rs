//! Backward explicit time stepping for terminal-value problems
//!
//! ```text
//! -∂_t v + F(t, x, v, Dv, D²v) = 0   on [0, T) x R^d,      v(T, ·) = f
//! ```
//!
//! Two schemes are provided. The interpolation scheme keeps nodal values
//! `v_k` and steps `v_k = v_{k+1} - Δt F_{k+1}(v_{k+1})`, evaluating `F`
//! through the kernel interpolant of `v_{k+1}`. The regression scheme fits an
//! ℓ1-constrained kernel expansion to `f` and then, per step, to the values of
//! `F(t_{k+1}, ·; v(t_{k+1}, ·))` on the collocation set, so that
//! `v(t_k, ·) = G(·; θ_n) - Δt Σ_{i>k} G(·; θ_i)`.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::{CollocationSet, TimeGrid};
use crate::interp::{kernel_sum, kernel_sum_grad, kernel_sum_hess, GramSystem, InterpError, Interpolant, NodalJets};
use crate::kernel::WendlandKernel;
use crate::l1regress::{BudgetSchedule, RegressError, RegressionModel, RegressionProblem};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("problem dimension {problem} does not match {other}")]
    DimensionMismatch { problem: usize, other: usize },
    #[error("non-finite nodal values at time index {step}")]
    NonFinite { step: usize },
    #[error("Hamiltonian is not finite for control {control:?}")]
    ControlEvaluation { control: Vec<f64> },
    #[error("control set is empty")]
    NoControls,
    #[error("time {0} is not on the time grid")]
    OffGrid(f64),
    #[error("time index {index} out of range (n = {steps})")]
    IndexOutOfRange { index: usize, steps: usize },
    #[error("degenerate ellipticity violated: F increased by {increase:e} for a PSD Hessian increment")]
    NotDegenerateElliptic { increase: f64 },
    #[error("diffusion matrix is not symmetric at a sampled point")]
    AsymmetricDiffusion,
    #[error("regression failed at time index {step}: {source}")]
    Regression {
        step: usize,
        #[source]
        source: RegressError,
    },
    #[error(transparent)]
    Interp(#[from] InterpError),
    #[error("failed to write output: {0}")]
    Output(String),
}

/// Arguments of `F(t, x, z, p, X)`; `hess` is row-major `d x d`.
#[derive(Debug, Clone, Copy)]
pub struct Jet<'a> {
    pub t: f64,
    pub x: &'a [f64],
    pub z: f64,
    pub p: &'a [f64],
    pub hess: &'a [f64],
}

/// Arguments of the Hamiltonian `H(t, x, z, b·p, tr(a X))` for one control.
#[derive(Debug, Clone, Copy)]
pub struct HamiltonianArgs<'a> {
    pub t: f64,
    pub x: &'a [f64],
    pub z: f64,
    pub drift_term: f64,
    pub diffusion_term: f64,
    pub control: &'a [f64],
}

pub type ScalarField = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type GeneralNonlinearity = Arc<dyn Fn(&Jet) -> f64 + Send + Sync>;
/// `(x, π) -> b(x, π)`, a `d`-vector.
pub type DriftFn = Arc<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync>;
/// `(x, π) -> a(x, π)`, row-major `d x d` symmetric.
pub type DiffusionFn = Arc<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync>;
pub type Hamiltonian = Arc<dyn Fn(&HamiltonianArgs) -> f64 + Send + Sync>;

/// Controls over which the Hamiltonian is maximized.
#[derive(Debug, Clone, PartialEq)]
pub enum ControlSet {
    /// Exhaustive maximum over a list of control parameter vectors.
    Finite(Vec<Vec<f64>>),
    /// The Hamiltonian already returns the supremum in closed form; drift and
    /// diffusion are evaluated at this reference control.
    ClosedForm(Vec<f64>),
}

/// `F(t, x; φ) = sup_{π ∈ K} H(t, x, φ(x), b(x,π)ᵀDφ(x), tr(a(x,π) D²φ(x)))`.
#[derive(Clone)]
pub struct ControlForm {
    pub drift: DriftFn,
    pub diffusion: DiffusionFn,
    pub hamiltonian: Hamiltonian,
    pub controls: ControlSet,
}

impl fmt::Debug for ControlForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ControlForm")
            .field("controls", &self.controls)
            .finish_non_exhaustive()
    }
}

impl ControlForm {
    fn control_list(&self) -> &[Vec<f64>] {
        match &self.controls {
            ControlSet::Finite(list) => list,
            ControlSet::ClosedForm(reference) => std::slice::from_ref(reference),
        }
    }

    /// Maximizes `H` over the controls given a precomputed gradient and Hessian.
    pub fn evaluate(&self, jet: &Jet) -> Result<f64, SolverError> {
        let controls = self.control_list();
        if controls.is_empty() {
            return Err(SolverError::NoControls);
        }
        let mut best = f64::NEG_INFINITY;
        for control in controls {
            let b = (self.drift)(jet.x, control);
            let a = (self.diffusion)(jet.x, control);
            let drift_term: f64 = b.iter().zip(jet.p).map(|(b, p)| b * p).sum();
            let diffusion_term: f64 = a.iter().zip(jet.hess).map(|(a, h)| a * h).sum();
            let h = (self.hamiltonian)(&HamiltonianArgs {
                t: jet.t,
                x: jet.x,
                z: jet.z,
                drift_term,
                diffusion_term,
                control,
            });
            if !h.is_finite() {
                return Err(SolverError::ControlEvaluation {
                    control: control.clone(),
                });
            }
            best = best.max(h);
        }
        Ok(best)
    }
}

#[derive(Clone)]
pub enum Nonlinearity {
    General(GeneralNonlinearity),
    Control(ControlForm),
}

impl fmt::Debug for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Nonlinearity::General(_) => f.write_str("General(..)"),
            Nonlinearity::Control(c) => f.debug_tuple("Control").field(c).finish(),
        }
    }
}

impl Nonlinearity {
    pub fn zero() -> Self {
        Nonlinearity::General(Arc::new(|_| 0.0))
    }

    pub fn evaluate(&self, jet: &Jet) -> Result<f64, SolverError> {
        match self {
            Nonlinearity::General(f) => Ok(f(jet)),
            Nonlinearity::Control(c) => c.evaluate(jet),
        }
    }
}

/// Terminal-value problem: dimension, horizon `T`, terminal data and `F`.
#[derive(Clone)]
pub struct HjbProblem {
    pub dim: usize,
    pub horizon: f64,
    pub terminal: ScalarField,
    pub nonlinearity: Nonlinearity,
}

impl fmt::Debug for HjbProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HjbProblem")
            .field("dim", &self.dim)
            .field("horizon", &self.horizon)
            .field("nonlinearity", &self.nonlinearity)
            .finish_non_exhaustive()
    }
}

impl HjbProblem {
    /// Spot-checks `F(.., X + E) <= F(.., X) + 1e-9` for random symmetric `X`
    /// and random PSD `E`, and symmetry of `a(x, π)` for control forms.
    pub fn check_structure(&self, samples: usize, seed: u64) -> Result<(), SolverError> {
        let d = self.dim;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..samples {
            let t = rng.gen_range(0.0..=self.horizon);
            let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let z = rng.gen_range(-2.0..2.0);
            let p: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let raw = DMatrix::from_fn(d, d, |_, _| rng.gen_range(-2.0..2.0));
            let hess = (&raw + raw.transpose()) * 0.5;
            let b = DMatrix::from_fn(d, d, |_, _| rng.gen_range(-1.0..1.0));
            let bump = &b * b.transpose();
            let base = row_major(&hess);
            let bumped = row_major(&(&hess + &bump));
            let f0 = self.nonlinearity.evaluate(&Jet {
                t,
                x: &x,
                z,
                p: &p,
                hess: &base,
            })?;
            let f1 = self.nonlinearity.evaluate(&Jet {
                t,
                x: &x,
                z,
                p: &p,
                hess: &bumped,
            })?;
            if f1 > f0 + 1e-9 {
                return Err(SolverError::NotDegenerateElliptic { increase: f1 - f0 });
            }
            if let Nonlinearity::Control(form) = &self.nonlinearity {
                for control in form.control_list() {
                    let a = (form.diffusion)(&x, control);
                    for m in 0..d {
                        for l in 0..m {
                            if a[m * d + l] != a[l * d + m] {
                                return Err(SolverError::AsymmetricDiffusion);
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let (r, c) = m.shape();
    let mut out = Vec::with_capacity(r * c);
    for i in 0..r {
        for j in 0..c {
            out.push(m[(i, j)]);
        }
    }
    out
}

/// Drift and diffusion terms `Σ_m B_m(π) A⁻¹v` and `Σ_{m,l} B_ml(π) A⁻¹v`
/// at every node for a single control.
#[derive(Debug, Clone, PartialEq)]
pub struct StepTerms {
    pub drift: Vec<f64>,
    pub diffusion: Vec<f64>,
}

pub fn hjb_step_operator(
    gs: &GramSystem,
    form: &ControlForm,
    control: &[f64],
    values: &[f64],
) -> Result<StepTerms, SolverError> {
    let alpha = gs.solve(values)?;
    let jets = gs.nodal_jets(&alpha)?;
    Ok(step_terms(gs, form, control, &jets))
}

fn step_terms(gs: &GramSystem, form: &ControlForm, control: &[f64], jets: &NodalJets) -> StepTerms {
    let pts = gs.colloc().points();
    let (drift, diffusion) = (0..gs.len())
        .into_par_iter()
        .map(|i| {
            let b = (form.drift)(&pts[i], control);
            let a = (form.diffusion)(&pts[i], control);
            let hess = &jets.hessians[i * jets.dim * jets.dim..(i + 1) * jets.dim * jets.dim];
            let q: f64 = b.iter().zip(jets.gradient(i)).map(|(b, p)| b * p).sum();
            let s: f64 = a.iter().zip(hess).map(|(a, h)| a * h).sum();
            (q, s)
        })
        .unzip();
    StepTerms { drift, diffusion }
}

/// `F_j = F(t, x⁽ʲ⁾; v̄)` at every node, `v̄` the interpolant of `values`.
///
/// Control forms go through the nodal derivative operators; general
/// nonlinearities evaluate the interpolant and its derivatives pointwise.
pub fn nodal_nonlinearity(
    problem: &HjbProblem,
    gs: &Arc<GramSystem>,
    t: f64,
    values: &[f64],
) -> Result<Vec<f64>, SolverError> {
    let pts = gs.colloc().points();
    match &problem.nonlinearity {
        Nonlinearity::Control(form) => {
            let alpha = gs.solve(values)?;
            let jets = gs.nodal_jets(&alpha)?;
            let d = jets.dim;
            (0..gs.len())
                .into_par_iter()
                .map(|i| {
                    form.evaluate(&Jet {
                        t,
                        x: &pts[i],
                        z: values[i],
                        p: jets.gradient(i),
                        hess: &jets.hessians[i * d * d..(i + 1) * d * d],
                    })
                })
                .collect()
        }
        Nonlinearity::General(f) => {
            let ip = gs.interpolate(values)?;
            (0..gs.len())
                .into_par_iter()
                .map(|i| {
                    let z = ip.eval(&pts[i])?;
                    let p = ip.eval_grad(&pts[i])?;
                    let hess = row_major(&ip.eval_hess(&pts[i])?);
                    Ok(f(&Jet {
                        t,
                        x: &pts[i],
                        z,
                        p: &p,
                        hess: &hess,
                    }))
                })
                .collect()
        }
    }
}

/// Values, gradients and Hessians of a computed solution on the time grid.
pub trait SchemeSolution {
    fn time_grid(&self) -> &TimeGrid;
    fn eval(&self, k: usize, x: &[f64]) -> Result<f64, SolverError>;
    fn eval_grad(&self, k: usize, x: &[f64]) -> Result<Vec<f64>, SolverError>;
    fn eval_hess(&self, k: usize, x: &[f64]) -> Result<DMatrix<f64>, SolverError>;
    /// Values at the collocation points at time index `k`.
    fn nodal_values(&self, k: usize) -> Result<Vec<f64>, SolverError>;

    /// Evaluation at a grid time `t`; no interpolation between grid times.
    fn eval_at_time(&self, t: f64, x: &[f64]) -> Result<f64, SolverError> {
        let k = self.time_grid().index_of(t).ok_or(SolverError::OffGrid(t))?;
        self.eval(k, x)
    }

    fn check_index(&self, k: usize) -> Result<(), SolverError> {
        let steps = self.time_grid().steps();
        if k > steps {
            return Err(SolverError::IndexOutOfRange { index: k, steps });
        }
        Ok(())
    }
}

/// `Δt / Δx²`, reported (not enforced) for explicit-step stability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityReport {
    pub dt: f64,
    pub fill_distance: f64,
    pub diffusion_number: f64,
}

impl StabilityReport {
    fn new(dt: f64, fill_distance: f64) -> Self {
        StabilityReport {
            dt,
            fill_distance,
            diffusion_number: dt / (fill_distance * fill_distance),
        }
    }
}

/// Output of [`solve_interp`]: nodal vectors `v_k` and coefficients `A⁻¹v_k`.
#[derive(Debug, Clone)]
pub struct InterpSolution {
    gram: Arc<GramSystem>,
    tgrid: TimeGrid,
    values: Vec<Vec<f64>>,
    alphas: Vec<Vec<f64>>,
    pub stability: StabilityReport,
}

impl InterpSolution {
    pub fn gram(&self) -> &Arc<GramSystem> {
        &self.gram
    }

    /// All nodal vectors, indexed by time index.
    pub fn history(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn interpolant(&self, k: usize) -> Result<Interpolant, SolverError> {
        self.check_index(k)?;
        Ok(self.gram.interpolate(&self.values[k])?)
    }

    fn check_point(&self, x: &[f64]) -> Result<(), SolverError> {
        if x.len() != self.gram.dim() {
            return Err(SolverError::DimensionMismatch {
                problem: self.gram.dim(),
                other: x.len(),
            });
        }
        Ok(())
    }
}

impl SchemeSolution for InterpSolution {
    fn time_grid(&self) -> &TimeGrid {
        &self.tgrid
    }

    fn eval(&self, k: usize, x: &[f64]) -> Result<f64, SolverError> {
        self.check_index(k)?;
        self.check_point(x)?;
        Ok(kernel_sum(
            self.gram.kernel(),
            self.gram.colloc().points(),
            &self.alphas[k],
            x,
        ))
    }

    fn eval_grad(&self, k: usize, x: &[f64]) -> Result<Vec<f64>, SolverError> {
        self.check_index(k)?;
        self.check_point(x)?;
        self.gram.kernel().require_first().map_err(InterpError::from)?;
        Ok(kernel_sum_grad(
            self.gram.kernel(),
            self.gram.colloc().points(),
            &self.alphas[k],
            x,
        ))
    }

    fn eval_hess(&self, k: usize, x: &[f64]) -> Result<DMatrix<f64>, SolverError> {
        self.check_index(k)?;
        self.check_point(x)?;
        self.gram.kernel().require_second().map_err(InterpError::from)?;
        Ok(kernel_sum_hess(
            self.gram.kernel(),
            self.gram.colloc().points(),
            &self.alphas[k],
            x,
        ))
    }

    fn nodal_values(&self, k: usize) -> Result<Vec<f64>, SolverError> {
        self.check_index(k)?;
        Ok(self.values[k].clone())
    }
}

/// Interpolation scheme: `v_n = f|_Γ`, `v_k = v_{k+1} - Δt F_{k+1}(v_{k+1})`.
pub fn solve_interp(
    problem: &HjbProblem,
    gs: &Arc<GramSystem>,
    tgrid: &TimeGrid,
) -> Result<InterpSolution, SolverError> {
    if problem.dim != gs.dim() {
        return Err(SolverError::DimensionMismatch {
            problem: problem.dim,
            other: gs.dim(),
        });
    }
    let n = tgrid.steps();
    let times = tgrid.times();
    let pts = gs.colloc().points();
    let terminal: Vec<f64> = pts.iter().map(|x| (problem.terminal)(x)).collect();
    if terminal.iter().any(|v| !v.is_finite()) {
        return Err(SolverError::NonFinite { step: n });
    }
    let mut values = vec![Vec::new(); n + 1];
    values[n] = terminal;
    for k in (0..n).rev() {
        let dt = times[k + 1] - times[k];
        let f = nodal_nonlinearity(problem, gs, times[k + 1], &values[k + 1])?;
        let next: Vec<f64> = values[k + 1].iter().zip(&f).map(|(v, f)| v - dt * f).collect();
        if next.iter().any(|v| !v.is_finite()) {
            return Err(SolverError::NonFinite { step: k });
        }
        values[k] = next;
    }
    let alphas = values.iter().map(|v| gs.solve(v)).collect::<Result<Vec<_>, _>>()?;
    Ok(InterpSolution {
        gram: Arc::clone(gs),
        tgrid: tgrid.clone(),
        values,
        alphas,
        stability: StabilityReport::new(tgrid.dt(), gs.colloc().fill_distance()),
    })
}

/// Output of [`solve_regress`]: the terminal model, one model per step, and
/// the telescoped weights of `v(t_k, ·)` for every `k`.
#[derive(Debug, Clone)]
pub struct RegressSolution {
    tgrid: TimeGrid,
    colloc: CollocationSet,
    pub terminal: RegressionModel,
    /// `step_models[k]` is the fit of `F(t_{k+1}, ·; v(t_{k+1}, ·))`.
    pub step_models: Vec<RegressionModel>,
    cumulative: Vec<(Vec<f64>, f64)>,
    pub stability: StabilityReport,
}

impl RegressSolution {
    fn model_weights(&self, k: usize) -> &(Vec<f64>, f64) {
        &self.cumulative[k]
    }

    fn kernel(&self) -> &WendlandKernel {
        &self.terminal.kernel
    }

    fn centers(&self) -> &[Vec<f64>] {
        &self.terminal.centers
    }

    /// `G(x; θ_n) - Δt Σ_{i=k+1}^{n} G(x; θ_i)` summed model by model.
    pub fn eval_by_models(&self, k: usize, x: &[f64]) -> Result<f64, SolverError> {
        self.check_index(k)?;
        let times = self.tgrid.times();
        let mut v = self
            .terminal
            .predict(x)
            .map_err(|e| SolverError::Regression { step: k, source: e })?;
        for i in k..self.step_models.len() {
            let dt = times[i + 1] - times[i];
            v -= dt
                * self.step_models[i]
                    .predict(x)
                    .map_err(|e| SolverError::Regression { step: i, source: e })?;
        }
        Ok(v)
    }

    fn check_point(&self, x: &[f64]) -> Result<(), SolverError> {
        if x.len() != self.kernel().dim() {
            return Err(SolverError::DimensionMismatch {
                problem: self.kernel().dim(),
                other: x.len(),
            });
        }
        Ok(())
    }
}

impl SchemeSolution for RegressSolution {
    fn time_grid(&self) -> &TimeGrid {
        &self.tgrid
    }

    fn eval(&self, k: usize, x: &[f64]) -> Result<f64, SolverError> {
        self.check_index(k)?;
        self.check_point(x)?;
        let (w, c) = self.model_weights(k);
        Ok(kernel_sum(self.kernel(), self.centers(), w, x) + c)
    }

    fn eval_grad(&self, k: usize, x: &[f64]) -> Result<Vec<f64>, SolverError> {
        self.check_index(k)?;
        self.check_point(x)?;
        self.kernel().require_first().map_err(InterpError::from)?;
        let (w, _) = self.model_weights(k);
        Ok(kernel_sum_grad(self.kernel(), self.centers(), w, x))
    }

    fn eval_hess(&self, k: usize, x: &[f64]) -> Result<DMatrix<f64>, SolverError> {
        self.check_index(k)?;
        self.check_point(x)?;
        self.kernel().require_second().map_err(InterpError::from)?;
        let (w, _) = self.model_weights(k);
        Ok(kernel_sum_hess(self.kernel(), self.centers(), w, x))
    }

    fn nodal_values(&self, k: usize) -> Result<Vec<f64>, SolverError> {
        self.colloc.points().iter().map(|x| self.eval(k, x)).collect()
    }
}

/// Regression scheme settings.
#[derive(Debug, Clone)]
pub struct RegressConfig {
    /// Number of centers `M` (a subsample of the collocation set when `M < N`).
    pub centers: usize,
    pub schedule: BudgetSchedule,
    /// Scheme parameter `h`; each fit is certified to gap `<= h²`.
    pub h: f64,
}

pub fn solve_regress(
    problem: &HjbProblem,
    kernel: &WendlandKernel,
    colloc: &CollocationSet,
    tgrid: &TimeGrid,
    config: &RegressConfig,
) -> Result<RegressSolution, SolverError> {
    if problem.dim != colloc.dim() || problem.dim != kernel.dim() {
        return Err(SolverError::DimensionMismatch {
            problem: problem.dim,
            other: colloc.dim(),
        });
    }
    let n = tgrid.steps();
    let times = tgrid.times();
    let pts = colloc.points();
    let centers: Vec<Vec<f64>> = colloc
        .subsample_indices(config.centers.max(1))
        .into_iter()
        .map(|i| pts[i].clone())
        .collect();
    let m = centers.len();
    let kernel = Arc::new(kernel.clone());
    let reg = RegressionProblem::new(Arc::clone(&kernel), pts, Arc::new(centers))
        .map_err(|e| SolverError::Regression { step: n, source: e })?;
    let budget = config.schedule.budget(m);

    let terminal_targets: Vec<f64> = pts.iter().map(|x| (problem.terminal)(x)).collect();
    let terminal = reg
        .fit(&terminal_targets, budget, config.h)
        .map_err(|e| SolverError::Regression { step: n, source: e })?;

    let mut cumulative = vec![(Vec::new(), 0.0); n + 1];
    cumulative[n] = (terminal.gamma.clone(), terminal.intercept);
    let mut step_models: Vec<Option<RegressionModel>> = vec![None; n];
    let d = problem.dim;

    for k in (0..n).rev() {
        let (w, c) = cumulative[k + 1].clone();
        let t = times[k + 1];
        let targets = (0..pts.len())
            .into_par_iter()
            .map(|j| {
                let x = &pts[j];
                let z = kernel_sum(&kernel, reg.centers(), &w, x) + c;
                let p = kernel_sum_grad(&kernel, reg.centers(), &w, x);
                let hess = row_major(&kernel_sum_hess(&kernel, reg.centers(), &w, x));
                debug_assert_eq!(hess.len(), d * d);
                problem.nonlinearity.evaluate(&Jet {
                    t,
                    x,
                    z,
                    p: &p,
                    hess: &hess,
                })
            })
            .collect::<Result<Vec<f64>, _>>()?;
        if targets.iter().any(|v| !v.is_finite()) {
            return Err(SolverError::NonFinite { step: k + 1 });
        }
        let model = reg
            .fit(&targets, budget, config.h)
            .map_err(|e| SolverError::Regression { step: k, source: e })?;
        let dt = times[k + 1] - times[k];
        let next_w: Vec<f64> = w.iter().zip(&model.gamma).map(|(a, g)| a - dt * g).collect();
        let next_c = c - dt * model.intercept;
        if next_w.iter().any(|v| !v.is_finite()) || !next_c.is_finite() {
            return Err(SolverError::NonFinite { step: k });
        }
        cumulative[k] = (next_w, next_c);
        step_models[k] = Some(model);
    }

    Ok(RegressSolution {
        tgrid: tgrid.clone(),
        colloc: colloc.clone(),
        terminal,
        step_models: step_models.into_iter().map(|m| m.expect("every step fitted")).collect(),
        cumulative,
        stability: StabilityReport::new(tgrid.dt(), colloc.fill_distance()),
    })
}

/// Writes nodal values of every time index as `k,t,node_index,value` rows.
/// Floats use the shortest round-trip representation.
pub fn write_history_csv<W: Write>(sol: &dyn SchemeSolution, writer: W) -> Result<(), SolverError> {
    let out = |e: csv::Error| SolverError::Output(e.to_string());
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    w.write_record(["k", "t", "node_index", "value"]).map_err(out)?;
    for (k, &t) in sol.time_grid().times().iter().enumerate() {
        for (j, v) in sol.nodal_values(k)?.iter().enumerate() {
            w.write_record([k.to_string(), format!("{t:e}"), j.to_string(), format!("{v:e}")])
                .map_err(out)?;
        }
    }
    w.flush().map_err(|e| SolverError::Output(e.to_string()))
}
