//! Gram systems, kernel interpolants and the nodal derivative operators.
//!
//! For collocation points `x⁽¹⁾..x⁽ᴺ⁾` the assembled matrices are
//!
//! ```text
//! A  = {φ (|x⁽ⁱ⁾ - x⁽ʲ⁾|)}     A₁ = {φ1(|x⁽ⁱ⁾ - x⁽ʲ⁾|)}     A₂ = {φ2(|x⁽ⁱ⁾ - x⁽ʲ⁾|)}
//! ```
//!
//! together with the coordinate diagonals `G_l = diag(x⁽¹⁾_l, .., x⁽ᴺ⁾_l)`. The drift and
//! diffusion operators `B_l = Q_l (G_l A₁ - A₁ G_l)` and `B_ml` map nodal values
//! `ξ` (through `A⁻¹ξ`) to weighted first and second derivatives of the
//! interpolant at the nodes.

use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::{tensor_grid, CollocationSet, GeometryError};
use crate::kernel::{KernelError, WendlandKernel};
use crate::linalg::{Cholesky, LinalgError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InterpError {
    #[error("kernel dimension {kernel} does not match collocation dimension {points}")]
    DimensionMismatch { kernel: usize, points: usize },
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("axis {axis} out of range for dimension {dim}")]
    AxisOutOfRange { axis: usize, dim: usize },
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Nonzero pattern of one Gram row: neighbours within the kernel support.
#[derive(Debug, Clone, Default)]
struct SparseRow {
    cols: Vec<usize>,
    a: Vec<f64>,
    a1: Vec<f64>,
    a2: Vec<f64>,
}

/// Gram matrix, its Cholesky factor and the derivative matrices for one
/// kernel and collocation set. Immutable once assembled.
#[derive(Debug, Clone)]
pub struct GramSystem {
    kernel: WendlandKernel,
    colloc: CollocationSet,
    a: DMatrix<f64>,
    factor: Cholesky,
    a1: Option<DMatrix<f64>>,
    a2: Option<DMatrix<f64>>,
    rows: Vec<SparseRow>,
}

/// Values, gradients and Hessians of an interpolant at every node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalJets {
    pub dim: usize,
    pub values: Vec<f64>,
    /// Row-major `N x d`.
    pub gradients: Vec<f64>,
    /// Row-major `N x d x d`.
    pub hessians: Vec<f64>,
}

impl NodalJets {
    pub fn gradient(&self, node: usize) -> &[f64] {
        &self.gradients[node * self.dim..(node + 1) * self.dim]
    }

    pub fn hessian(&self, node: usize) -> DMatrix<f64> {
        let d = self.dim;
        DMatrix::from_row_slice(d, d, &self.hessians[node * d * d..(node + 1) * d * d])
    }
}

impl GramSystem {
    /// Assembles `A`, `A₁`, `A₂` (row-parallel, deterministic) and factors `A`
    /// with escalating jitter.
    pub fn assemble(kernel: WendlandKernel, colloc: CollocationSet) -> Result<Self, InterpError> {
        if kernel.dim() != colloc.dim() {
            return Err(InterpError::DimensionMismatch {
                kernel: kernel.dim(),
                points: colloc.dim(),
            });
        }
        let n = colloc.len();
        let pts = colloc.points();
        let has1 = kernel.has_first_derivative_kernel();
        let has2 = kernel.has_second_derivative_kernel();
        let support = kernel.support_scale();

        let dense_rows: Vec<(Vec<f64>, Vec<f64>, Vec<f64>, SparseRow)> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut row_a = vec![0.0; n];
                let mut row_a1 = vec![0.0; if has1 { n } else { 0 }];
                let mut row_a2 = vec![0.0; if has2 { n } else { 0 }];
                let mut sparse = SparseRow::default();
                for j in 0..n {
                    let r = distance(&pts[i], &pts[j]);
                    if r >= support {
                        continue;
                    }
                    row_a[j] = kernel.phi_unchecked(r);
                    let f1 = if has1 { kernel.phi1_unchecked(r) } else { 0.0 };
                    let f2 = if has2 { kernel.phi2_unchecked(r) } else { 0.0 };
                    if has1 {
                        row_a1[j] = f1;
                    }
                    if has2 {
                        row_a2[j] = f2;
                    }
                    sparse.cols.push(j);
                    sparse.a.push(row_a[j]);
                    sparse.a1.push(f1);
                    sparse.a2.push(f2);
                }
                (row_a, row_a1, row_a2, sparse)
            })
            .collect();

        let mut a = DMatrix::zeros(n, n);
        let mut a1 = has1.then(|| DMatrix::zeros(n, n));
        let mut a2 = has2.then(|| DMatrix::zeros(n, n));
        let mut rows = Vec::with_capacity(n);
        for (i, (ra, ra1, ra2, sparse)) in dense_rows.into_iter().enumerate() {
            for j in 0..n {
                a[(i, j)] = ra[j];
            }
            if let Some(m) = a1.as_mut() {
                for j in 0..n {
                    m[(i, j)] = ra1[j];
                }
            }
            if let Some(m) = a2.as_mut() {
                for j in 0..n {
                    m[(i, j)] = ra2[j];
                }
            }
            rows.push(sparse);
        }
        let factor = Cholesky::factor_with_jitter(&a)?;
        Ok(GramSystem {
            kernel,
            colloc,
            a,
            factor,
            a1,
            a2,
            rows,
        })
    }

    pub fn kernel(&self) -> &WendlandKernel {
        &self.kernel
    }

    pub fn colloc(&self) -> &CollocationSet {
        &self.colloc
    }

    pub fn len(&self) -> usize {
        self.colloc.len()
    }

    pub fn is_empty(&self) -> bool {
        self.colloc.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.colloc.dim()
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn factor(&self) -> &Cholesky {
        &self.factor
    }

    /// Diagonal shift that was needed to factor `A` (0 when none).
    pub fn jitter(&self) -> f64 {
        self.factor.jitter()
    }

    pub fn a1(&self) -> Result<&DMatrix<f64>, InterpError> {
        self.kernel.require_first()?;
        Ok(self.a1.as_ref().expect("present when phi1 exists"))
    }

    pub fn a2(&self) -> Result<&DMatrix<f64>, InterpError> {
        self.kernel.require_second()?;
        Ok(self.a2.as_ref().expect("present when phi2 exists"))
    }

    /// `G_l` as its diagonal.
    pub fn coordinate_diagonal(&self, axis: usize) -> Result<Vec<f64>, InterpError> {
        self.check_axis(axis)?;
        Ok(self.colloc.points().iter().map(|p| p[axis]).collect())
    }

    fn check_axis(&self, axis: usize) -> Result<(), InterpError> {
        if axis >= self.dim() {
            return Err(InterpError::AxisOutOfRange { axis, dim: self.dim() });
        }
        Ok(())
    }

    fn check_len(&self, v: &[f64]) -> Result<(), InterpError> {
        if v.len() != self.len() {
            return Err(InterpError::LengthMismatch {
                expected: self.len(),
                got: v.len(),
            });
        }
        Ok(())
    }

    /// `A⁻¹ ξ` with one step of iterative refinement.
    pub fn solve(&self, values: &[f64]) -> Result<Vec<f64>, InterpError> {
        self.check_len(values)?;
        Ok(self.factor.solve_refined(&self.a, values)?)
    }

    /// Kernel interpolant of `values` on the collocation set.
    pub fn interpolate(self: &Arc<Self>, values: &[f64]) -> Result<Interpolant, InterpError> {
        let alpha = self.solve(values)?;
        Ok(Interpolant {
            gram: Arc::clone(self),
            alpha,
        })
    }

    /// `B_l = Q_l (G_l A₁ - A₁ G_l)` with `Q_l = diag(b_diag)`.
    pub fn drift_matrix(&self, b_diag: &[f64], axis: usize) -> Result<DMatrix<f64>, InterpError> {
        self.check_axis(axis)?;
        self.check_len(b_diag)?;
        let a1 = self.a1()?;
        let pts = self.colloc.points();
        Ok(DMatrix::from_fn(self.len(), self.len(), |i, j| {
            b_diag[i] * ((pts[i][axis] - pts[j][axis]) * a1[(i, j)])
        }))
    }

    /// `B_ml` with `Q_ml = diag(a_diag)`:
    /// `Q (A₁ + G_m² A₂ - 2 G_m A₂ G_m + A₂ G_m²)` for `m = l` and
    /// `Q (G_m G_l A₂ - G_m A₂ G_l - G_l A₂ G_m + A₂ G_m G_l)` otherwise,
    /// assembled entrywise in factored form.
    pub fn diffusion_matrix(&self, a_diag: &[f64], m: usize, l: usize) -> Result<DMatrix<f64>, InterpError> {
        self.check_axis(m)?;
        self.check_axis(l)?;
        self.check_len(a_diag)?;
        let a1 = self.a1()?;
        let a2 = self.a2()?;
        let pts = self.colloc.points();
        Ok(DMatrix::from_fn(self.len(), self.len(), |i, j| {
            let dm = pts[i][m] - pts[j][m];
            let entry = if m == l {
                a1[(i, j)] + a2[(i, j)] * (dm * dm)
            } else {
                let dl = pts[i][l] - pts[j][l];
                a2[(i, j)] * (dm * dl)
            };
            a_diag[i] * entry
        }))
    }

    /// Interpolant values, gradients and Hessians at every node, given the
    /// coefficients `alpha = A⁻¹ξ`. Uses the sparse neighbour lists, so the
    /// cost is proportional to the number of Gram nonzeros.
    pub fn nodal_jets(&self, alpha: &[f64]) -> Result<NodalJets, InterpError> {
        self.check_len(alpha)?;
        self.kernel.require_second()?;
        let d = self.dim();
        let pts = self.colloc.points();
        let per_node: Vec<(f64, Vec<f64>, Vec<f64>)> = (0..self.len())
            .into_par_iter()
            .map(|i| {
                let row = &self.rows[i];
                let mut value = 0.0;
                let mut grad = vec![0.0; d];
                let mut hess = vec![0.0; d * d];
                let mut diff = [0.0f64; 8];
                for (k, &j) in row.cols.iter().enumerate() {
                    let w = alpha[j];
                    value += w * row.a[k];
                    for c in 0..d {
                        diff[c] = pts[i][c] - pts[j][c];
                    }
                    let f1 = row.a1[k];
                    let f2 = row.a2[k];
                    for m in 0..d {
                        grad[m] += w * (f1 * diff[m]);
                        for l in 0..d {
                            let mut e = f2 * (diff[m] * diff[l]);
                            if m == l {
                                e += f1;
                            }
                            hess[m * d + l] += w * e;
                        }
                    }
                }
                (value, grad, hess)
            })
            .collect();
        let mut values = Vec::with_capacity(self.len());
        let mut gradients = Vec::with_capacity(self.len() * d);
        let mut hessians = Vec::with_capacity(self.len() * d * d);
        for (v, g, h) in per_node {
            values.push(v);
            gradients.extend(g);
            hessians.extend(h);
        }
        Ok(NodalJets {
            dim: d,
            values,
            gradients,
            hessians,
        })
    }
}

#[inline]
fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `I(ξ)(x) = Σ_j alpha_j Φ(x - x⁽ʲ⁾)` with `alpha = A⁻¹ξ`.
#[derive(Debug, Clone)]
pub struct Interpolant {
    gram: Arc<GramSystem>,
    alpha: Vec<f64>,
}

impl Interpolant {
    pub fn gram(&self) -> &Arc<GramSystem> {
        &self.gram
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    fn check_point(&self, x: &[f64]) -> Result<(), InterpError> {
        if x.len() != self.gram.dim() {
            return Err(InterpError::Kernel(KernelError::DimensionMismatch {
                expected: self.gram.dim(),
                got: x.len(),
            }));
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64, InterpError> {
        self.check_point(x)?;
        Ok(kernel_sum(&self.gram.kernel, self.gram.colloc.points(), &self.alpha, x))
    }

    pub fn eval_grad(&self, x: &[f64]) -> Result<Vec<f64>, InterpError> {
        self.check_point(x)?;
        self.gram.kernel.require_first()?;
        Ok(kernel_sum_grad(
            &self.gram.kernel,
            self.gram.colloc.points(),
            &self.alpha,
            x,
        ))
    }

    pub fn eval_hess(&self, x: &[f64]) -> Result<DMatrix<f64>, InterpError> {
        self.check_point(x)?;
        self.gram.kernel.require_second()?;
        Ok(kernel_sum_hess(
            &self.gram.kernel,
            self.gram.colloc.points(),
            &self.alpha,
            x,
        ))
    }
}

/// `Σ_j w_j Φ(x - c_j)`.
pub(crate) fn kernel_sum(kernel: &WendlandKernel, centers: &[Vec<f64>], weights: &[f64], x: &[f64]) -> f64 {
    centers
        .iter()
        .zip(weights)
        .map(|(c, &w)| w * kernel.phi_unchecked(distance(x, c)))
        .sum()
}

pub(crate) fn kernel_sum_grad(kernel: &WendlandKernel, centers: &[Vec<f64>], weights: &[f64], x: &[f64]) -> Vec<f64> {
    let d = x.len();
    let mut grad = vec![0.0; d];
    for (c, &w) in centers.iter().zip(weights) {
        let r = distance(x, c);
        if r >= kernel.support_scale() {
            continue;
        }
        let f1 = kernel.phi1_unchecked(r);
        for m in 0..d {
            grad[m] += w * (f1 * (x[m] - c[m]));
        }
    }
    grad
}

pub(crate) fn kernel_sum_hess(
    kernel: &WendlandKernel,
    centers: &[Vec<f64>],
    weights: &[f64],
    x: &[f64],
) -> DMatrix<f64> {
    let d = x.len();
    let mut hess = DMatrix::zeros(d, d);
    for (c, &w) in centers.iter().zip(weights) {
        let r = distance(x, c);
        if r >= kernel.support_scale() {
            continue;
        }
        let f1 = kernel.phi1_unchecked(r);
        let f2 = kernel.phi2_unchecked(r);
        for m in 0..d {
            for l in 0..d {
                let mut e = f2 * ((x[m] - c[m]) * (x[l] - c[l]));
                if m == l {
                    e += f1;
                }
                hess[(m, l)] += w * e;
            }
        }
    }
    hess
}

/// A test function with analytic derivatives up to second order.
pub trait SmoothFunction: Sync {
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
    fn hessian(&self, x: &[f64]) -> DMatrix<f64>;
}

/// `g(x) = sin(shift + Σ_i x_i)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SineRidge {
    pub shift: f64,
}

impl SmoothFunction for SineRidge {
    fn value(&self, x: &[f64]) -> f64 {
        (self.shift + x.iter().sum::<f64>()).sin()
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        vec![(self.shift + x.iter().sum::<f64>()).cos(); x.len()]
    }

    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let d = x.len();
        DMatrix::from_element(d, d, -(self.shift + x.iter().sum::<f64>()).sin())
    }
}

/// Sup-norm interpolation errors of one grid size, per derivative order.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub n_points: usize,
    pub fill_distance: f64,
    /// `[order 0, order 1, order 2]`; orders the kernel cannot differentiate are NaN.
    pub sup_errors: [f64; 3],
}

/// Interpolates `g` on equispaced grids of `[-R, R]^d` with the given point
/// counts and measures `sup |D^α g - D^α I(g)|` for `|α| <= 2` on a probe
/// lattice refined ten times per axis.
pub fn convergence_probe(
    kernel: &WendlandKernel,
    radius: f64,
    counts: &[usize],
    g: &dyn SmoothFunction,
) -> Result<Vec<ConvergenceRow>, InterpError> {
    let dim = kernel.dim();
    counts
        .iter()
        .map(|&count| {
            let per_axis = crate::geometry::per_axis_count(dim, count)?;
            let colloc = tensor_grid(dim, per_axis, radius)?;
            let fill = colloc.fill_distance();
            let values: Vec<f64> = colloc.points().iter().map(|p| g.value(p)).collect();
            let gs = Arc::new(GramSystem::assemble(kernel.clone(), colloc)?);
            let ip = gs.interpolate(&values)?;

            let probes_axis = 10 * (per_axis - 1) + 1;
            let half = radius * (1.0 - crate::geometry::BOUNDARY_NUDGE);
            let total = probes_axis.pow(dim as u32);
            let has1 = kernel.has_first_derivative_kernel();
            let has2 = kernel.has_second_derivative_kernel();
            let errs = (0..total)
                .into_par_iter()
                .map(|mut idx| {
                    let mut x = vec![0.0; dim];
                    for c in (0..dim).rev() {
                        let k = idx % probes_axis;
                        idx /= probes_axis;
                        x[c] = -half + 2.0 * half * k as f64 / (probes_axis - 1) as f64;
                    }
                    let e0 = (ip.eval(&x).expect("dims match") - g.value(&x)).abs();
                    let e1 = if has1 {
                        let gi = ip.eval_grad(&x).expect("dims match");
                        gi.iter()
                            .zip(g.gradient(&x))
                            .map(|(a, b)| (a - b).abs())
                            .fold(0.0, f64::max)
                    } else {
                        f64::NAN
                    };
                    let e2 = if has2 {
                        let hi = ip.eval_hess(&x).expect("dims match");
                        (hi - g.hessian(&x)).abs().max()
                    } else {
                        f64::NAN
                    };
                    [e0, e1, e2]
                })
                .reduce(
                    || [0.0, 0.0, 0.0],
                    |a, b| [nan_max(a[0], b[0]), nan_max(a[1], b[1]), nan_max(a[2], b[2])],
                );
            Ok(ConvergenceRow {
                n_points: count,
                fill_distance: fill,
                sup_errors: errs,
            })
        })
        .collect()
}

fn nan_max(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.max(b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::equispaced_grid;
    use crate::kernel::build_kernel;

    fn line(points: &[f64], r: f64) -> CollocationSet {
        CollocationSet::new(points.iter().map(|&x| vec![x]).collect(), r).unwrap()
    }

    #[test]
    fn single_point_gram_is_one() {
        let gs = GramSystem::assemble(build_kernel(1, 2).unwrap(), line(&[0.3], 1.0)).unwrap();
        assert_eq!(gs.gram()[(0, 0)], 1.0);
        assert_eq!(gs.jitter(), 0.0);
        let b = gs.drift_matrix(&[2.0], 0).unwrap();
        assert_eq!(b[(0, 0)], 0.0);
        let k = gs.kernel().phi1(0.0).unwrap();
        let d = gs.diffusion_matrix(&[0.5], 0, 0).unwrap();
        assert!((d[(0, 0)] - 0.5 * k).abs() < 1e-15);
    }

    #[test]
    fn far_points_give_identity() {
        let gs = GramSystem::assemble(build_kernel(1, 2).unwrap(), line(&[-1.0, 0.5], 2.0)).unwrap();
        assert_eq!(gs.gram(), &DMatrix::identity(2, 2));
    }

    #[test]
    fn gram_matches_scalar_kernel() {
        let k = build_kernel(1, 2).unwrap();
        let pts = [-0.2, 0.0, 0.2];
        let gs = GramSystem::assemble(k.clone(), line(&pts, 1.0)).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(gs.gram()[(i, j)], k.phi((pts[i] - pts[j]).abs()).unwrap());
            }
        }
        let a = gs.gram();
        assert_eq!(a, &a.transpose());
        assert_eq!(gs.a1().unwrap(), &gs.a1().unwrap().transpose());
        assert_eq!(gs.a2().unwrap(), &gs.a2().unwrap().transpose());
    }

    #[test]
    fn zero_values_and_unit_columns() {
        let gs =
            Arc::new(GramSystem::assemble(build_kernel(1, 3).unwrap(), equispaced_grid(1, 7, 1.0).unwrap()).unwrap());
        let ip = gs.interpolate(&[0.0; 7]).unwrap();
        assert!(ip.alpha().iter().all(|&a| a == 0.0));
        assert_eq!(ip.eval(&[0.37]).unwrap(), 0.0);

        let col: Vec<f64> = gs.gram().column(0).iter().copied().collect();
        let ip = gs.interpolate(&col).unwrap();
        for (i, a) in ip.alpha().iter().enumerate() {
            let e = if i == 0 { 1.0 } else { 0.0 };
            assert!((a - e).abs() < 1e-10);
        }
    }

    #[test]
    fn dimension_and_axis_errors() {
        let colloc = equispaced_grid(2, 9, 1.0).unwrap();
        assert!(matches!(
            GramSystem::assemble(build_kernel(1, 2).unwrap(), colloc.clone()),
            Err(InterpError::DimensionMismatch { .. })
        ));
        let gs = GramSystem::assemble(build_kernel(2, 3).unwrap(), colloc).unwrap();
        assert!(matches!(
            gs.drift_matrix(&[1.0; 9], 2),
            Err(InterpError::AxisOutOfRange { axis: 2, dim: 2 })
        ));
        assert!(matches!(
            gs.diffusion_matrix(&[1.0; 8], 0, 1),
            Err(InterpError::LengthMismatch { expected: 9, got: 8 })
        ));
        assert_eq!(gs.drift_matrix(&[0.0; 9], 1).unwrap(), DMatrix::zeros(9, 9));
    }

    #[test]
    fn sparsity_follows_support() {
        let gs = GramSystem::assemble(build_kernel(1, 4).unwrap(), equispaced_grid(1, 33, 4.0).unwrap()).unwrap();
        let pts = gs.colloc().points();
        for i in 0..33 {
            for j in 0..33 {
                if (pts[i][0] - pts[j][0]).abs() >= 1.0 {
                    assert_eq!(gs.gram()[(i, j)], 0.0);
                    assert_eq!(gs.a1().unwrap()[(i, j)], 0.0);
                    assert_eq!(gs.a2().unwrap()[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn probe_of_zero_function_is_exact() {
        struct Zero;
        impl SmoothFunction for Zero {
            fn value(&self, _: &[f64]) -> f64 {
                0.0
            }
            fn gradient(&self, x: &[f64]) -> Vec<f64> {
                vec![0.0; x.len()]
            }
            fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
                DMatrix::zeros(x.len(), x.len())
            }
        }
        let rows = convergence_probe(&build_kernel(1, 4).unwrap(), 1.0, &[5, 9], &Zero).unwrap();
        for row in rows {
            assert_eq!(row.sup_errors, [0.0, 0.0, 0.0]);
        }
    }
}
