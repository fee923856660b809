//! ℓ1-budget kernel regression over a fixed center set.
//!
//! Fits `G(x; θ) = Σ_l γ_l Φ(x - ξ_l) + c` to nodal targets by minimizing
//! `J(θ) = Σ_j |u_j - G(x_j; θ)|²` subject to `Σ_l |γ_l| + |c| <= β`. The
//! intercept is the last coordinate of `θ` and shares the budget.
//!
//! The solver is a pairwise Frank–Wolfe method: iterates are convex
//! combinations of the `2(M+1)` vertices `±β e_i` of the ℓ1 ball, each step
//! moves weight from the worst active vertex to the linear-minimization vertex
//! with an exact line search, and the Frank–Wolfe gap
//! `⟨∇J(θ), θ - s(θ)⟩ >= J(θ) - min J` is the stopping certificate.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::interp::{kernel_sum, kernel_sum_grad, kernel_sum_hess};
use crate::kernel::{KernelError, WendlandKernel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegressError {
    #[error("budget must be positive and finite (got {0})")]
    InvalidBudget(f64),
    #[error("tolerance must be positive (got {0})")]
    InvalidTolerance(f64),
    #[error("need at least one sample point and one center")]
    Empty,
    #[error("expected {expected} targets, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("point has dimension {got}, kernel expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("no certified solution after {iterations} iterations (best gap {best_gap:e}, target {target:e})")]
    NotConverged {
        iterations: usize,
        best_gap: f64,
        target: f64,
    },
    #[error("targets contain non-finite values")]
    NonFiniteTargets,
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// `β_M` as a function of the number of centers.
#[derive(Clone)]
pub enum BudgetGrowth {
    /// `β_M = β₀ (1 + ln(1 + M))`.
    Logarithmic,
    /// `β_M = f(M)`; must be positive and increasing.
    Custom(Arc<dyn Fn(usize) -> f64 + Send + Sync>),
}

impl fmt::Debug for BudgetGrowth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BudgetGrowth::Logarithmic => f.write_str("Logarithmic"),
            BudgetGrowth::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BudgetSchedule {
    pub beta0: f64,
    pub growth: BudgetGrowth,
}

impl Default for BudgetSchedule {
    fn default() -> Self {
        BudgetSchedule {
            beta0: 10.0,
            growth: BudgetGrowth::Logarithmic,
        }
    }
}

impl BudgetSchedule {
    pub fn logarithmic(beta0: f64) -> Self {
        BudgetSchedule {
            beta0,
            growth: BudgetGrowth::Logarithmic,
        }
    }

    pub fn budget(&self, centers: usize) -> f64 {
        match &self.growth {
            BudgetGrowth::Logarithmic => self.beta0 * (1.0 + (1.0 + centers as f64).ln()),
            BudgetGrowth::Custom(f) => f(centers),
        }
    }
}

/// Linear minimization over the ℓ1 ball of radius `β`:
/// `-β sign(g_i) e_i` at the first index maximizing `|g_i|`, with
/// `sign(0)` taken as negative so `g = 0` yields `+β e_0`.
pub fn lmo(gradient: &[f64], budget: f64) -> Vec<f64> {
    let mut out = vec![0.0; gradient.len()];
    if let Some((i, g)) = argmax_abs(gradient) {
        out[i] = if g > 0.0 { -budget } else { budget };
    }
    out
}

fn argmax_abs(v: &[f64]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &x) in v.iter().enumerate() {
        if best.is_none_or(|(_, b)| x.abs() > b.abs()) {
            best = Some((i, x));
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FitOptions {
    /// Iteration cap; `None` uses `max(20_000, 50 (M+1) ceil(1/ε))`.
    pub max_iterations: Option<usize>,
    /// Record the objective after every iteration.
    pub trace: bool,
}

/// Sample points and centers with the precomputed design `K = [Φ(x_j - ξ_l) | 1]`
/// and its normal matrix `KᵀK`, reusable across many fits.
#[derive(Debug, Clone)]
pub struct RegressionProblem {
    kernel: Arc<WendlandKernel>,
    centers: Arc<Vec<Vec<f64>>>,
    design: DMatrix<f64>,
    normal: DMatrix<f64>,
}

impl RegressionProblem {
    pub fn new(
        kernel: Arc<WendlandKernel>,
        samples: &[Vec<f64>],
        centers: Arc<Vec<Vec<f64>>>,
    ) -> Result<Self, RegressError> {
        if samples.is_empty() || centers.is_empty() {
            return Err(RegressError::Empty);
        }
        let d = kernel.dim();
        for p in samples.iter().chain(centers.iter()) {
            if p.len() != d {
                return Err(RegressError::DimensionMismatch {
                    expected: d,
                    got: p.len(),
                });
            }
        }
        let m = centers.len();
        let design = DMatrix::from_fn(samples.len(), m + 1, |j, l| {
            if l == m {
                1.0
            } else {
                let r = crate::kernel::norm(
                    &samples[j]
                        .iter()
                        .zip(&centers[l])
                        .map(|(a, b)| a - b)
                        .collect::<Vec<_>>(),
                );
                kernel.phi_unchecked(r)
            }
        });
        let normal = design.transpose() * &design;
        Ok(RegressionProblem {
            kernel,
            centers,
            design,
            normal,
        })
    }

    pub fn centers(&self) -> &Arc<Vec<Vec<f64>>> {
        &self.centers
    }

    pub fn kernel(&self) -> &Arc<WendlandKernel> {
        &self.kernel
    }

    pub fn sample_count(&self) -> usize {
        self.design.nrows()
    }

    /// `J(θ) = |Kθ - u|²`, computed from the residual.
    pub fn objective(&self, theta: &[f64], targets: &[f64]) -> f64 {
        let r = &self.design * DVector::from_column_slice(theta) - DVector::from_column_slice(targets);
        r.norm_squared()
    }

    /// `∇J(θ) = 2 Kᵀ(Kθ - u)`.
    pub fn gradient(&self, theta: &[f64], targets: &[f64]) -> Vec<f64> {
        let r = &self.design * DVector::from_column_slice(theta) - DVector::from_column_slice(targets);
        (self.design.transpose() * r * 2.0).as_slice().to_vec()
    }

    /// Frank–Wolfe gap of a feasible `θ`.
    pub fn gap(&self, theta: &[f64], targets: &[f64], budget: f64) -> f64 {
        let g = self.gradient(theta, targets);
        let s = lmo(&g, budget);
        g.iter().zip(theta).zip(&s).map(|((g, t), s)| g * (t - s)).sum()
    }

    pub fn fit(&self, targets: &[f64], budget: f64, tolerance: f64) -> Result<RegressionModel, RegressError> {
        self.fit_with(targets, budget, tolerance, FitOptions::default())
            .map(|(model, _)| model)
    }

    /// Fits to certified gap `<= tolerance²`. Returns the model and, when
    /// `options.trace` is set, the objective after each iteration.
    pub fn fit_with(
        &self,
        targets: &[f64],
        budget: f64,
        tolerance: f64,
        options: FitOptions,
    ) -> Result<(RegressionModel, Vec<f64>), RegressError> {
        if !(budget > 0.0 && budget.is_finite()) {
            return Err(RegressError::InvalidBudget(budget));
        }
        if !(tolerance > 0.0) {
            return Err(RegressError::InvalidTolerance(tolerance));
        }
        if targets.len() != self.sample_count() {
            return Err(RegressError::LengthMismatch {
                expected: self.sample_count(),
                got: targets.len(),
            });
        }
        if targets.iter().any(|t| !t.is_finite()) {
            return Err(RegressError::NonFiniteTargets);
        }
        let dim = self.normal.nrows();
        let target_gap = tolerance * tolerance;
        let max_iter = options.max_iterations.unwrap_or_else(|| {
            let scaled = 50 * dim * (1.0 / tolerance).ceil().min(1e6) as usize;
            scaled.max(20_000)
        });

        let q = self.design.transpose() * DVector::from_column_slice(targets);
        let q = q.as_slice();
        let qmat = &self.normal;

        // Vertex 2i is +β e_i, vertex 2i+1 is -β e_i. Start at θ = 0.
        let mut weights = vec![0.0f64; 2 * dim];
        weights[0] = 0.5;
        weights[1] = 0.5;
        let mut theta = vec![0.0f64; dim];
        let mut q_theta = vec![0.0f64; dim];
        let mut trace = Vec::new();
        let mut best_gap = f64::INFINITY;

        let vertex = |v: usize| -> (usize, f64) { (v / 2, if v.is_multiple_of(2) { budget } else { -budget }) };

        let mut iterations = 0;
        for iter in 0..max_iter {
            iterations = iter + 1;
            if iter % 512 == 511 {
                // Refresh the incrementally maintained Qθ.
                let fresh = qmat * DVector::from_column_slice(&theta);
                q_theta.copy_from_slice(fresh.as_slice());
            }
            let grad: Vec<f64> = q_theta.iter().zip(q).map(|(a, b)| 2.0 * (a - b)).collect();
            let (i_fw, g_fw) = argmax_abs(&grad).expect("dim >= 1");
            let s_vertex = if g_fw > 0.0 { 2 * i_fw + 1 } else { 2 * i_fw };
            let g_theta: f64 = grad.iter().zip(&theta).map(|(g, t)| g * t).sum();
            let gap = g_theta + budget * g_fw.abs();
            best_gap = best_gap.min(gap);
            if gap <= target_gap {
                // Confirm with the residual-based gradient before stopping.
                let exact = self.gap(&theta, targets, budget);
                if exact <= target_gap {
                    return Ok((self.finish(targets, budget, theta, exact, iter), trace));
                }
                let fresh = qmat * DVector::from_column_slice(&theta);
                q_theta.copy_from_slice(fresh.as_slice());
                continue;
            }

            // Away vertex: active vertex with the largest ⟨g, v⟩.
            let mut away = None;
            let mut away_score = f64::NEG_INFINITY;
            for (v, &w) in weights.iter().enumerate() {
                if w > 0.0 {
                    let (i, sign) = vertex(v);
                    let score = sign * grad[i];
                    if score > away_score {
                        away_score = score;
                        away = Some(v);
                    }
                }
            }
            let away = away.expect("weights sum to one");
            if away == s_vertex {
                break;
            }
            let (is, ss) = vertex(s_vertex);
            let (ia, sa) = vertex(away);
            // d = s - a has at most two nonzero coordinates.
            let dirs: [(usize, f64); 2] = [(is, ss), (ia, -sa)];
            let slope: f64 = dirs.iter().map(|&(i, c)| grad[i] * c).sum();
            let mut curvature = 0.0;
            for &(i, ci) in &dirs {
                for &(j, cj) in &dirs {
                    curvature += ci * cj * qmat[(i, j)];
                }
            }
            let max_step = weights[away];
            let step = if curvature > 0.0 {
                (-slope / (2.0 * curvature)).clamp(0.0, max_step)
            } else {
                max_step
            };
            if step <= 0.0 {
                break;
            }
            if step >= max_step {
                weights[s_vertex] += max_step;
                weights[away] = 0.0;
            } else {
                weights[s_vertex] += step;
                weights[away] -= step;
            }
            for &i in &[is, ia] {
                let new = budget * (weights[2 * i] - weights[2 * i + 1]);
                let delta = new - theta[i];
                if delta != 0.0 {
                    for (k, qt) in q_theta.iter_mut().enumerate() {
                        *qt += qmat[(k, i)] * delta;
                    }
                    theta[i] = new;
                }
            }
            if options.trace {
                trace.push(self.objective(&theta, targets));
            }
        }
        // Exact gap at the final iterate before giving up.
        let gap = self.gap(&theta, targets, budget);
        if gap <= target_gap {
            return Ok((self.finish(targets, budget, theta, gap, iterations), trace));
        }
        Err(RegressError::NotConverged {
            iterations,
            best_gap: best_gap.min(gap),
            target: target_gap,
        })
    }

    fn finish(&self, targets: &[f64], budget: f64, theta: Vec<f64>, gap: f64, iterations: usize) -> RegressionModel {
        let objective = self.objective(&theta, targets);
        let m = self.centers.len();
        RegressionModel {
            kernel: Arc::clone(&self.kernel),
            centers: Arc::clone(&self.centers),
            gamma: theta[..m].to_vec(),
            intercept: theta[m],
            budget,
            gap_certificate: gap.max(0.0),
            objective,
            iterations,
        }
    }
}

/// Fits `targets` sampled at `samples` with kernel translates at `centers`.
pub fn fit(
    targets: &[f64],
    samples: &[Vec<f64>],
    centers: Arc<Vec<Vec<f64>>>,
    kernel: Arc<WendlandKernel>,
    budget: f64,
    tolerance: f64,
) -> Result<RegressionModel, RegressError> {
    RegressionProblem::new(kernel, samples, centers)?.fit(targets, budget, tolerance)
}

/// `G(x; θ) = Σ_l γ_l Φ(x - ξ_l) + c` with its certificate.
#[derive(Debug, Clone)]
pub struct RegressionModel {
    pub kernel: Arc<WendlandKernel>,
    pub centers: Arc<Vec<Vec<f64>>>,
    pub gamma: Vec<f64>,
    pub intercept: f64,
    pub budget: f64,
    /// Frank–Wolfe gap at the returned point; bounds `J - min J`.
    pub gap_certificate: f64,
    pub objective: f64,
    pub iterations: usize,
}

#[derive(Serialize)]
struct ModelRow<'a> {
    center: &'a str,
    weight: f64,
    intercept: f64,
    budget: f64,
    gap: f64,
}

impl RegressionModel {
    /// All-zero model on the given centers.
    pub fn zero(kernel: Arc<WendlandKernel>, centers: Arc<Vec<Vec<f64>>>, budget: f64) -> Self {
        let m = centers.len();
        RegressionModel {
            kernel,
            centers,
            gamma: vec![0.0; m],
            intercept: 0.0,
            budget,
            gap_certificate: 0.0,
            objective: 0.0,
            iterations: 0,
        }
    }

    pub fn l1_norm(&self) -> f64 {
        self.gamma.iter().map(|g| g.abs()).sum::<f64>() + self.intercept.abs()
    }

    fn check(&self, x: &[f64]) -> Result<(), RegressError> {
        if x.len() != self.kernel.dim() {
            return Err(RegressError::DimensionMismatch {
                expected: self.kernel.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64, RegressError> {
        self.check(x)?;
        Ok(kernel_sum(&self.kernel, &self.centers, &self.gamma, x) + self.intercept)
    }

    pub fn predict_grad(&self, x: &[f64]) -> Result<Vec<f64>, RegressError> {
        self.check(x)?;
        self.kernel.require_first()?;
        Ok(kernel_sum_grad(&self.kernel, &self.centers, &self.gamma, x))
    }

    pub fn predict_hess(&self, x: &[f64]) -> Result<DMatrix<f64>, RegressError> {
        self.check(x)?;
        self.kernel.require_second()?;
        Ok(kernel_sum_hess(&self.kernel, &self.centers, &self.gamma, x))
    }

    /// One row per center: `center` (coordinates joined by `;`), `weight`,
    /// and the model-wide `intercept`, `budget`, `gap`.
    pub fn write_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        for (c, &g) in self.centers.iter().zip(&self.gamma) {
            let center = c.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";");
            w.serialize(ModelRow {
                center: &center,
                weight: g,
                intercept: self.intercept,
                budget: self.budget,
                gap: self.gap_certificate,
            })?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::build_kernel;

    fn setup(n: usize) -> RegressionProblem {
        let pts: Vec<Vec<f64>> = (0..n).map(|i| vec![-0.9 + 1.8 * i as f64 / (n - 1) as f64]).collect();
        RegressionProblem::new(Arc::new(build_kernel(1, 2).unwrap()), &pts, Arc::new(pts.clone())).unwrap()
    }

    #[test]
    fn lmo_examples() {
        assert_eq!(lmo(&[0.0, 0.0], 3.0), vec![3.0, 0.0]);
        assert_eq!(lmo(&[0.0, 3.0, -5.0], 2.0), vec![0.0, 0.0, 2.0]);
        let g = [0.4, -1.5, 1.5, 0.2];
        let s = lmo(&g, 2.0);
        let inner: f64 = g.iter().zip(&s).map(|(a, b)| a * b).sum();
        assert_eq!(inner, -2.0 * 1.5);
        assert_eq!(s, vec![0.0, 2.0, 0.0, 0.0]);
    }

    #[test]
    fn zero_targets_give_zero_model() {
        let p = setup(5);
        let m = p.fit(&[0.0; 5], 3.0, 1e-6).unwrap();
        assert!(m.gamma.iter().all(|&g| g == 0.0));
        assert_eq!(m.intercept, 0.0);
        assert_eq!(m.objective, 0.0);
    }

    #[test]
    fn constant_targets_use_intercept() {
        let p = setup(6);
        let m = p.fit(&[0.7; 6], 2.0, 1e-5).unwrap();
        assert!(m.objective <= 1e-10);
        assert!(m.l1_norm() <= 2.0 * (1.0 + 1e-12));
        assert!((m.predict(&[5.0]).unwrap() - m.intercept).abs() < 1e-15);
    }

    #[test]
    fn objective_is_monotone_and_iterates_feasible() {
        let p = setup(8);
        let targets: Vec<f64> = (0..8).map(|i| (i as f64 * 0.7).sin()).collect();
        let (m, trace) = p
            .fit_with(
                &targets,
                1.5,
                1e-4,
                FitOptions {
                    max_iterations: None,
                    trace: true,
                },
            )
            .unwrap();
        for w in trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12 * (1.0 + w[0]));
        }
        assert!(m.l1_norm() <= 1.5 * (1.0 + 1e-12));
        assert!(m.gap_certificate <= 1e-8);
    }

    #[test]
    fn budget_schedule() {
        let s = BudgetSchedule::default();
        assert_eq!(s.beta0, 10.0);
        assert!((s.budget(0) - 10.0).abs() < 1e-12);
        let mut prev = 0.0;
        for m in 1..200 {
            let b = s.budget(m);
            assert!(b > prev);
            prev = b;
        }
        let custom = BudgetSchedule {
            beta0: 1.0,
            growth: BudgetGrowth::Custom(Arc::new(|m| m as f64 + 1.0)),
        };
        assert_eq!(custom.budget(4), 5.0);
    }

    #[test]
    fn input_validation() {
        let p = setup(4);
        assert_eq!(
            p.fit(&[0.0; 3], 1.0, 1e-3).unwrap_err(),
            RegressError::LengthMismatch { expected: 4, got: 3 }
        );
        assert_eq!(
            p.fit(&[0.0; 4], 0.0, 1e-3).unwrap_err(),
            RegressError::InvalidBudget(0.0)
        );
        assert_eq!(
            p.fit(&[0.0; 4], 1.0, 0.0).unwrap_err(),
            RegressError::InvalidTolerance(0.0)
        );
        let tiny = FitOptions {
            max_iterations: Some(1),
            trace: false,
        };
        let targets = [1.0, -1.0, 1.0, -1.0];
        assert!(matches!(
            p.fit_with(&targets, 100.0, 1e-9, tiny),
            Err(RegressError::NotConverged { .. })
        ));
    }

    #[test]
    fn model_csv_dump() {
        let p = setup(3);
        let m = p.fit(&[0.1, 0.2, 0.3], 5.0, 1e-6).unwrap();
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("center,weight,intercept,budget,gap\n"));
        assert_eq!(text.lines().count(), 4);
    }
}
