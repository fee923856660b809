//! Collocation grids, time grids, fill distance and Sobol evaluation points.

use rayon::prelude::*;
use thiserror::Error;

/// Relative inward shift applied to grid endpoints so `Γ ⊂ (-R, R)^d`.
pub const BOUNDARY_NUDGE: f64 = 1e-9;

/// Scaling constants of the benchmark collocation radius for `d = 1, 2`.
pub const RADIUS_GAMMA: [f64; 2] = [0.25, 0.2];

pub const MAX_SOBOL_DIM: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("unsupported dimension {0}")]
    UnsupportedDimension(usize),
    #[error("{count} points cannot form a tensor grid in dimension {dim}")]
    NotTensorizable { count: usize, dim: usize },
    #[error("an equispaced grid needs at least 2 points per axis (got {0})")]
    TooFewPoints(usize),
    #[error("box radius must be positive and finite (got {0})")]
    InvalidRadius(f64),
    #[error("point set is empty")]
    EmptyPointSet,
    #[error("point {index} has dimension {got}, expected {expected}")]
    DimensionMismatch { index: usize, expected: usize, got: usize },
    #[error("points {0} and {1} coincide")]
    DuplicatePoints(usize, usize),
    #[error("point {0} lies outside the box")]
    OutsideBox(usize),
    #[error("time grid needs n >= 1 steps and a positive horizon")]
    InvalidTimeGrid,
}

/// Pairwise-distinct collocation points inside `(-R, R)^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct CollocationSet {
    points: Vec<Vec<f64>>,
    dim: usize,
    box_radius: f64,
    fill_distance: f64,
}

impl CollocationSet {
    /// Validates `points` and computes the fill distance.
    pub fn new(points: Vec<Vec<f64>>, box_radius: f64) -> Result<Self, GeometryError> {
        if !(box_radius > 0.0 && box_radius.is_finite()) {
            return Err(GeometryError::InvalidRadius(box_radius));
        }
        let dim = points.first().ok_or(GeometryError::EmptyPointSet)?.len();
        if dim == 0 {
            return Err(GeometryError::UnsupportedDimension(0));
        }
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(GeometryError::DimensionMismatch {
                    index: i,
                    expected: dim,
                    got: p.len(),
                });
            }
            if p.iter().any(|c| !(c.abs() < box_radius)) {
                return Err(GeometryError::OutsideBox(i));
            }
        }
        if let Some((i, j)) = first_duplicate(&points) {
            return Err(GeometryError::DuplicatePoints(i, j));
        }
        let fill_distance = fill_distance(&points, box_radius)?;
        Ok(CollocationSet {
            points,
            dim,
            box_radius,
            fill_distance,
        })
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn box_radius(&self) -> f64 {
        self.box_radius
    }

    pub fn fill_distance(&self) -> f64 {
        self.fill_distance
    }

    /// Keeps `count` points spread evenly through the index range.
    pub fn subsample_indices(&self, count: usize) -> Vec<usize> {
        let n = self.points.len();
        if count >= n {
            return (0..n).collect();
        }
        if count <= 1 {
            return vec![n / 2];
        }
        (0..count)
            .map(|i| ((i as f64) * (n - 1) as f64 / (count - 1) as f64).round() as usize)
            .collect()
    }
}

fn first_duplicate(points: &[Vec<f64>]) -> Option<(usize, usize)> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        points[a]
            .iter()
            .zip(&points[b])
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    order
        .windows(2)
        .find(|w| points[w[0]] == points[w[1]])
        .map(|w| (w[0].min(w[1]), w[0].max(w[1])))
}

/// Per-axis point count of an `N`-point tensor grid in dimension `d`.
pub fn per_axis_count(dim: usize, count: usize) -> Result<usize, GeometryError> {
    if dim == 0 || dim > 3 {
        return Err(GeometryError::UnsupportedDimension(dim));
    }
    let root = (count as f64).powf(1.0 / dim as f64).round() as usize;
    let candidates = [root.saturating_sub(1), root, root + 1];
    candidates
        .into_iter()
        .find(|&m| m.pow(dim as u32) == count)
        .ok_or(GeometryError::NotTensorizable { count, dim })
}

/// Tensor grid with `per_axis` points per axis on `[-R, R]^d`, endpoints
/// nudged inward by `1e-9 R`. The first coordinate varies slowest.
pub fn tensor_grid(dim: usize, per_axis: usize, radius: f64) -> Result<CollocationSet, GeometryError> {
    if dim == 0 || dim > 3 {
        return Err(GeometryError::UnsupportedDimension(dim));
    }
    if per_axis < 2 {
        return Err(GeometryError::TooFewPoints(per_axis));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(GeometryError::InvalidRadius(radius));
    }
    let axis = axis_nodes(per_axis, radius);
    let total = per_axis.pow(dim as u32);
    let points = (0..total)
        .map(|mut idx| {
            let mut p = vec![0.0; dim];
            for c in (0..dim).rev() {
                p[c] = axis[idx % per_axis];
                idx /= per_axis;
            }
            p
        })
        .collect();
    CollocationSet::new(points, radius)
}

fn axis_nodes(per_axis: usize, radius: f64) -> Vec<f64> {
    let half = radius * (1.0 - BOUNDARY_NUDGE);
    let step = 2.0 * half / (per_axis - 1) as f64;
    (0..per_axis)
        .map(|i| {
            // Mirror the upper half so the axis is exactly symmetric.
            if 2 * i < per_axis - 1 {
                -half + step * i as f64
            } else if 2 * i == per_axis - 1 {
                0.0
            } else {
                half - step * (per_axis - 1 - i) as f64
            }
        })
        .collect()
}

/// `N` equispaced points on `[-R, R]^d`; `N` must be a `d`-th power.
pub fn equispaced_grid(dim: usize, count: usize, radius: f64) -> Result<CollocationSet, GeometryError> {
    if count < 2 {
        return Err(GeometryError::TooFewPoints(count));
    }
    let per_axis = per_axis_count(dim, count)?;
    tensor_grid(dim, per_axis, radius)
}

/// Collocation radius `R_d = γ_d N^{1/d - 1/(d + 2τ - 3)}` with `γ = (1/4, 1/5)`.
pub fn benchmark_radius(dim: usize, count: usize, tau: usize) -> Result<f64, GeometryError> {
    let gamma = match dim {
        1 | 2 => RADIUS_GAMMA[dim - 1],
        _ => return Err(GeometryError::UnsupportedDimension(dim)),
    };
    let d = dim as f64;
    let exponent = 1.0 / d - 1.0 / (d + 2.0 * tau as f64 - 3.0);
    Ok(gamma * (count as f64).powf(exponent))
}

/// Lower-bound estimate of `sup_{x in (-R,R)^d} min_j |x - x_j|` on a probe
/// lattice whose per-axis resolution is four times that of the point set
/// (and at least 65 probes per axis).
pub fn fill_distance(points: &[Vec<f64>], radius: f64) -> Result<f64, GeometryError> {
    let dim = points.first().ok_or(GeometryError::EmptyPointSet)?.len();
    let per_axis = (points.len() as f64).powf(1.0 / dim.max(1) as f64).ceil() as usize;
    let probes = (4 * per_axis).max(64) + 1;
    fill_distance_with_probes(points, radius, probes)
}

/// Fill distance estimate over a lattice of `probes_per_axis` points per axis
/// spanning the closed box `[-R, R]^d`.
pub fn fill_distance_with_probes(
    points: &[Vec<f64>],
    radius: f64,
    probes_per_axis: usize,
) -> Result<f64, GeometryError> {
    let dim = points.first().ok_or(GeometryError::EmptyPointSet)?.len();
    if dim == 0 {
        return Err(GeometryError::UnsupportedDimension(0));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(GeometryError::InvalidRadius(radius));
    }
    let m = probes_per_axis.max(2);
    let axis: Vec<f64> = (0..m)
        .map(|i| -radius + 2.0 * radius * i as f64 / (m - 1) as f64)
        .collect();
    let total = m.pow(dim as u32);
    let flat: Vec<f64> = points.iter().flatten().copied().collect();
    let worst = (0..total)
        .into_par_iter()
        .map(|mut idx| {
            let mut probe = [0.0f64; 8];
            for c in (0..dim).rev() {
                probe[c] = axis[idx % m];
                idx /= m;
            }
            let best = flat
                .chunks_exact(dim)
                .map(|p| p.iter().zip(&probe[..dim]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
                .fold(f64::INFINITY, f64::min);
            best
        })
        .reduce(|| 0.0, f64::max);
    Ok(worst.sqrt())
}

/// Uniform time grid `t_k = k T / n`, `k = 0..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    pub fn uniform(horizon: f64, steps: usize) -> Result<Self, GeometryError> {
        if steps == 0 || !(horizon > 0.0 && horizon.is_finite()) {
            return Err(GeometryError::InvalidTimeGrid);
        }
        let times = (0..=steps)
            .map(|k| {
                if k == steps {
                    horizon
                } else {
                    horizon * k as f64 / steps as f64
                }
            })
            .collect();
        Ok(TimeGrid { times })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Number of steps `n`.
    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn dt(&self) -> f64 {
        self.horizon() / self.steps() as f64
    }

    /// Grid index of `t`, if `t` is a grid time to within `1e-12 T`.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let tol = 1e-12 * self.horizon();
        let k = (t / self.dt()).round();
        if k < 0.0 || k as usize > self.steps() {
            return None;
        }
        let k = k as usize;
        ((self.times[k] - t).abs() <= tol).then_some(k)
    }
}

// Joe–Kuo direction numbers (new-joe-kuo-6.21201), dimensions 2..=8:
// (degree s, coefficient a, initial m_1..m_s).
const JOE_KUO: [(u32, u32, &[u32]); MAX_SOBOL_DIM - 1] = [
    (1, 0, &[1]),
    (2, 1, &[1, 3]),
    (3, 1, &[1, 3, 1]),
    (3, 2, &[1, 1, 1]),
    (4, 1, &[1, 1, 3, 3]),
    (4, 4, &[1, 3, 5, 13]),
    (5, 2, &[1, 1, 5, 5, 17]),
];

const SOBOL_BITS: u32 = 32;

fn direction_vectors(dim: usize) -> Vec<[u32; SOBOL_BITS as usize]> {
    let mut out = Vec::with_capacity(dim);
    // First coordinate: van der Corput in base 2.
    let mut first = [0u32; SOBOL_BITS as usize];
    for (i, v) in first.iter_mut().enumerate() {
        *v = 1u32 << (SOBOL_BITS - 1 - i as u32);
    }
    out.push(first);
    for &(s, a, m_init) in JOE_KUO.iter().take(dim.saturating_sub(1)) {
        let s = s as usize;
        let mut m = vec![0u32; SOBOL_BITS as usize];
        m[..s].copy_from_slice(m_init);
        for i in s..SOBOL_BITS as usize {
            let mut value = m[i - s] ^ (m[i - s] << s);
            for k in 1..s {
                let bit = (a >> (s - 1 - k)) & 1;
                if bit == 1 {
                    value ^= m[i - k] << k;
                }
            }
            m[i] = value;
        }
        let mut v = [0u32; SOBOL_BITS as usize];
        for i in 0..SOBOL_BITS as usize {
            v[i] = m[i] << (SOBOL_BITS - 1 - i as u32);
        }
        out.push(v);
    }
    out
}

/// First `count` Sobol points in `[-1, 1]^d`, in Gray-code order with the
/// initial all-zero point skipped (so the first point maps from `0.5`).
pub fn sobol_points(dim: usize, count: usize) -> Result<Vec<Vec<f64>>, GeometryError> {
    if dim == 0 || dim > MAX_SOBOL_DIM {
        return Err(GeometryError::UnsupportedDimension(dim));
    }
    let dirs = direction_vectors(dim);
    let scale = 1.0 / (1u64 << SOBOL_BITS) as f64;
    let mut state = vec![0u32; dim];
    let mut out = Vec::with_capacity(count);
    for i in 0..count as u64 {
        // Index of the lowest zero bit of i.
        let c = (!i).trailing_zeros() as usize;
        for (x, v) in state.iter_mut().zip(&dirs) {
            *x ^= v[c];
        }
        out.push(state.iter().map(|&x| 2.0 * (x as f64 * scale) - 1.0).collect());
    }
    Ok(out)
}

/// Evaluation-set size used by the benchmark by default: `10^d`.
pub fn default_eval_count(dim: usize) -> usize {
    10usize.pow(dim as u32)
}
