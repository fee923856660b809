//! Dense Cholesky factorization with an envelope (skyline) shortcut and
//! escalating diagonal jitter.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Diagonal shifts tried in order until the factorization succeeds.
pub const JITTER_SCHEDULE: [f64; 4] = [0.0, 1e-12, 1e-10, 1e-8];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not positive definite (pivot {pivot} at row {row} with jitter {jitter})")]
    NotPositiveDefinite { row: usize, pivot: f64, jitter: f64 },
    #[error("matrix must be square (got {rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("right-hand side has length {got}, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },
}

/// Lower factor `L` with `A + jitter I = L Lᵀ`, stored row-major.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    lower: Vec<f64>,
    // First structurally nonzero column of each row of A.
    first: Vec<usize>,
    jitter: f64,
    min_pivot: f64,
}

impl Cholesky {
    /// Factors `a` trying each shift of [`JITTER_SCHEDULE`] in turn.
    pub fn factor_with_jitter(a: &DMatrix<f64>) -> Result<Self, LinalgError> {
        let mut last = None;
        for &jitter in &JITTER_SCHEDULE {
            match Self::factor(a, jitter) {
                Ok(f) => return Ok(f),
                Err(e @ LinalgError::NotPositiveDefinite { .. }) => last = Some(e),
                Err(e) => return Err(e),
            }
        }
        Err(last.expect("jitter schedule is non-empty"))
    }

    pub fn factor(a: &DMatrix<f64>, jitter: f64) -> Result<Self, LinalgError> {
        let (rows, cols) = a.shape();
        if rows != cols {
            return Err(LinalgError::NotSquare { rows, cols });
        }
        let n = rows;
        let first: Vec<usize> = (0..n)
            .map(|i| (0..i).find(|&j| a[(i, j)] != 0.0).unwrap_or(i))
            .collect();
        let mut lower = vec![0.0; n * n];
        let mut min_pivot = f64::INFINITY;
        for i in 0..n {
            for j in first[i]..=i {
                let start = first[i].max(first[j]);
                let (ri, rj) = (i * n, j * n);
                let mut s = a[(i, j)];
                for k in start..j {
                    s -= lower[ri + k] * lower[rj + k];
                }
                if i == j {
                    let pivot = s + jitter;
                    if !(pivot > 0.0) {
                        return Err(LinalgError::NotPositiveDefinite { row: i, pivot, jitter });
                    }
                    min_pivot = min_pivot.min(pivot);
                    lower[ri + i] = pivot.sqrt();
                } else {
                    lower[ri + j] = s / lower[rj + j];
                }
            }
        }
        Ok(Cholesky {
            n,
            lower,
            first,
            jitter,
            min_pivot,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Smallest diagonal pivot (before the square root).
    pub fn min_pivot(&self) -> f64 {
        self.min_pivot
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if b.len() != self.n {
            return Err(LinalgError::LengthMismatch {
                expected: self.n,
                got: b.len(),
            });
        }
        let n = self.n;
        let mut y = b.to_vec();
        for i in 0..n {
            let row = &self.lower[i * n..i * n + i];
            let mut s = y[i];
            for k in self.first[i]..i {
                s -= row[k] * y[k];
            }
            y[i] = s / self.lower[i * n + i];
        }
        // Backward substitution with Lᵀ, column-oriented over rows of L.
        for i in (0..n).rev() {
            y[i] /= self.lower[i * n + i];
            let yi = y[i];
            for k in self.first[i]..i {
                y[k] -= self.lower[i * n + k] * yi;
            }
        }
        Ok(y)
    }

    /// Solve followed by one step of iterative refinement against `a`.
    pub fn solve_refined(&self, a: &DMatrix<f64>, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
        let mut x = self.solve(b)?;
        let xv = DVector::from_column_slice(&x);
        let residual = DVector::from_column_slice(b) - a * xv;
        let correction = self.solve(residual.as_slice())?;
        for (xi, ci) in x.iter_mut().zip(correction) {
            *xi += ci;
        }
        Ok(x)
    }

    /// Dense copy of `L`.
    pub fn lower(&self) -> DMatrix<f64> {
        DMatrix::from_fn(
            self.n,
            self.n,
            |i, j| if j <= i { self.lower[i * self.n + j] } else { 0.0 },
        )
    }
}
