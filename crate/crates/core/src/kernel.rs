//! Wendland kernels `Φ_{d,τ}` built from the exact coefficient recursion.
//!
//! The radial profile `φ` is a polynomial `p` on `[0, 1]` and zero beyond. Its
//! coefficients are generated with arbitrary-precision rationals, normalized so
//! that `φ(0) = 1`, and converted to `f64` once. The radial derivative kernels
//!
//! ```text
//! φ1(r) = φ'(r) / r        φ2(r) = φ1'(r) / r
//! ```
//!
//! are again polynomials (for `τ >= 1` and `τ >= 2` respectively) and are
//! derived by exact differentiation and division, so they are finite at `r = 0`
//! without any runtime special casing.
//!
//! For evaluation every polynomial is stored as `(1 - s)^m q(s)` where `m` is the
//! multiplicity of the root at `s = 1` and `q` has small degree. High-degree
//! monomial expansions cancel catastrophically near the support boundary; the
//! factored form does not.

use nalgebra::DMatrix;
use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

/// Largest admissible degree `ν + 2τ` unless overridden.
pub const DEFAULT_DEGREE_CAP: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("spatial dimension must be at least 1 (got {0})")]
    InvalidDimension(usize),
    #[error("kernel degree {degree} exceeds the cap {cap}")]
    DegreeCap { degree: usize, cap: usize },
    #[error("radius must be non-negative (got {0})")]
    NegativeRadius(f64),
    #[error("support scale must be positive and finite (got {0})")]
    InvalidSupportScale(f64),
    #[error("radial derivative kernel of order {order} is not a polynomial for tau = {tau}")]
    DerivativeUnavailable { order: usize, tau: usize },
    #[error("expected a {expected}-vector, got length {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Exact polynomial in the monomial basis, lowest degree first.
pub type RationalPoly = Vec<BigRational>;

/// `f64` evaluation form `(1 - s)^multiplicity * q(s)`.
#[derive(Debug, Clone, PartialEq)]
struct FactoredPoly {
    multiplicity: i32,
    quotient: Vec<f64>,
}

impl FactoredPoly {
    fn from_exact(poly: &[BigRational], normalizer: &BigRational) -> Self {
        let (multiplicity, quotient) = factor_out_one_minus_r(poly);
        let quotient = quotient
            .iter()
            .map(|c| (c / normalizer).to_f64().unwrap_or(f64::NAN))
            .collect();
        FactoredPoly {
            multiplicity: multiplicity as i32,
            quotient,
        }
    }

    #[inline]
    fn eval(&self, s: f64) -> f64 {
        let q = self.quotient.iter().rev().fold(0.0, |acc, &c| acc * s + c);
        (1.0 - s).powi(self.multiplicity) * q
    }
}

/// Compactly supported Wendland kernel `Φ_{d,τ}(x) = φ(|x| / ρ)`.
#[derive(Debug, Clone)]
pub struct WendlandKernel {
    dim: usize,
    tau: usize,
    nu: usize,
    p_coeffs: RationalPoly,
    p1_coeffs: Option<RationalPoly>,
    p2_coeffs: Option<RationalPoly>,
    support_scale: f64,
    normalizer: f64,
    value_form: FactoredPoly,
    first_form: Option<FactoredPoly>,
    second_form: Option<FactoredPoly>,
}

/// `ν = floor(τ + d/2 + 1)`.
pub fn smoothness_exponent(dim: usize, tau: usize) -> usize {
    tau + dim / 2 + 1
}

fn binomial(n: usize, k: usize) -> BigInt {
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

/// Runs the Wendland coefficient recursion and returns `p_{d,τ}` exactly.
///
/// Starts from `d_{j,0} = (-1)^j C(ν, j)` for `0 <= j <= ν` and applies
/// `τ` times the map
/// `d_{0,s+1} = Σ_j d_{j,s} / (j + 2)`, `d_{1,s+1} = 0`,
/// `d_{j,s+1} = -d_{j-2,s} / j`.
pub fn wendland_coefficients(dim: usize, tau: usize) -> RationalPoly {
    let nu = smoothness_exponent(dim, tau);
    let mut coeffs: RationalPoly = (0..=nu)
        .map(|j| {
            let c = BigRational::from_integer(binomial(nu, j));
            if j % 2 == 1 {
                -c
            } else {
                c
            }
        })
        .collect();
    for _ in 0..tau {
        let len = coeffs.len();
        let mut next = vec![BigRational::zero(); len + 2];
        next[0] = coeffs
            .iter()
            .enumerate()
            .map(|(j, c)| c / BigRational::from_integer(BigInt::from(j + 2)))
            .fold(BigRational::zero(), |acc, x| acc + x);
        for j in 2..len + 2 {
            next[j] = -(&coeffs[j - 2]) / BigRational::from_integer(BigInt::from(j));
        }
        coeffs = next;
    }
    coeffs
}

pub fn poly_derivative(poly: &[BigRational]) -> RationalPoly {
    if poly.len() <= 1 {
        return vec![BigRational::zero()];
    }
    poly.iter()
        .enumerate()
        .skip(1)
        .map(|(j, c)| c * BigRational::from_integer(BigInt::from(j)))
        .collect()
}

/// Exact division by `r`; `None` when the constant term is nonzero.
pub fn poly_divide_by_r(poly: &[BigRational]) -> Option<RationalPoly> {
    match poly.split_first() {
        None => Some(vec![BigRational::zero()]),
        Some((head, tail)) if head.is_zero() => {
            if tail.is_empty() {
                Some(vec![BigRational::zero()])
            } else {
                Some(tail.to_vec())
            }
        }
        Some(_) => None,
    }
}

pub fn poly_eval(poly: &[BigRational], r: &BigRational) -> BigRational {
    poly.iter().rev().fold(BigRational::zero(), |acc, c| acc * r + c)
}

/// Splits `poly = (1 - r)^m q(r)` with `q(1) != 0` (or `poly == 0`).
fn factor_out_one_minus_r(poly: &[BigRational]) -> (usize, RationalPoly) {
    let mut current = trim(poly.to_vec());
    let mut multiplicity = 0;
    loop {
        if current.len() <= 1 {
            return (multiplicity, current);
        }
        // Synthetic division by (r - 1).
        let n = current.len();
        let mut quotient = vec![BigRational::zero(); n - 1];
        let mut carry = BigRational::zero();
        for j in (1..n).rev() {
            carry = &carry + &current[j];
            quotient[j - 1] = carry.clone();
        }
        let remainder = carry + &current[0];
        if !remainder.is_zero() {
            return (multiplicity, current);
        }
        // (r - 1) q = (1 - r)(-q)
        current = quotient.into_iter().map(|c| -c).collect();
        multiplicity += 1;
    }
}

fn trim(mut poly: RationalPoly) -> RationalPoly {
    while poly.len() > 1 && poly.last().is_some_and(|c| c.is_zero()) {
        poly.pop();
    }
    poly
}

/// Exact polynomial degree (zero polynomial has degree 0).
pub fn poly_degree(poly: &[BigRational]) -> usize {
    trim(poly.to_vec()).len() - 1
}

impl WendlandKernel {
    pub fn new(dim: usize, tau: usize) -> Result<Self, KernelError> {
        Self::with_degree_cap(dim, tau, DEFAULT_DEGREE_CAP)
    }

    pub fn with_degree_cap(dim: usize, tau: usize, cap: usize) -> Result<Self, KernelError> {
        if dim == 0 {
            return Err(KernelError::InvalidDimension(dim));
        }
        let nu = smoothness_exponent(dim, tau);
        let degree = nu + 2 * tau;
        if degree > cap {
            return Err(KernelError::DegreeCap { degree, cap });
        }
        let p_coeffs = wendland_coefficients(dim, tau);
        let p1_coeffs = poly_divide_by_r(&poly_derivative(&p_coeffs));
        let p2_coeffs = p1_coeffs.as_ref().and_then(|p1| poly_divide_by_r(&poly_derivative(p1)));

        let norm_exact = p_coeffs[0].clone();
        debug_assert!(norm_exact.is_positive());
        let normalizer = norm_exact.to_f64().unwrap_or(f64::NAN);

        let value_form = FactoredPoly::from_exact(&p_coeffs, &norm_exact);
        let first_form = p1_coeffs.as_ref().map(|p| FactoredPoly::from_exact(p, &norm_exact));
        let second_form = p2_coeffs.as_ref().map(|p| FactoredPoly::from_exact(p, &norm_exact));

        Ok(WendlandKernel {
            dim,
            tau,
            nu,
            p_coeffs,
            p1_coeffs,
            p2_coeffs,
            support_scale: 1.0,
            normalizer,
            value_form,
            first_form,
            second_form,
        })
    }

    /// Returns a copy with support radius `ρ`; evaluation uses `r / ρ`.
    pub fn with_support_scale(mut self, scale: f64) -> Result<Self, KernelError> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(KernelError::InvalidSupportScale(scale));
        }
        self.support_scale = scale;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    pub fn nu(&self) -> usize {
        self.nu
    }

    pub fn degree(&self) -> usize {
        self.nu + 2 * self.tau
    }

    pub fn support_scale(&self) -> f64 {
        self.support_scale
    }

    /// `p(0)` of the unnormalized polynomial; the kernel is divided by it.
    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    /// Unnormalized exact coefficients of `p_{d,τ}`.
    pub fn p_coeffs(&self) -> &[BigRational] {
        &self.p_coeffs
    }

    /// Exact coefficients of `p'(r) / r`, present for `τ >= 1`.
    pub fn p1_coeffs(&self) -> Option<&[BigRational]> {
        self.p1_coeffs.as_deref()
    }

    /// Exact coefficients of `(p'(r) / r)' / r`, present for `τ >= 2`.
    pub fn p2_coeffs(&self) -> Option<&[BigRational]> {
        self.p2_coeffs.as_deref()
    }

    /// Normalized `f64` monomial coefficients (`p / p(0)`).
    pub fn normalized_coeffs(&self) -> Vec<f64> {
        let norm = &self.p_coeffs[0];
        self.p_coeffs
            .iter()
            .map(|c| (c / norm).to_f64().unwrap_or(f64::NAN))
            .collect()
    }

    /// Exact normalized coefficients, `p_j / p(0)`.
    pub fn normalized_rational_coeffs(&self) -> RationalPoly {
        let norm = &self.p_coeffs[0];
        self.p_coeffs.iter().map(|c| c / norm).collect()
    }

    pub fn has_first_derivative_kernel(&self) -> bool {
        self.first_form.is_some()
    }

    pub fn has_second_derivative_kernel(&self) -> bool {
        self.second_form.is_some()
    }

    fn check_radius(r: f64) -> Result<(), KernelError> {
        if r < 0.0 || r.is_nan() {
            Err(KernelError::NegativeRadius(r))
        } else {
            Ok(())
        }
    }

    pub fn phi(&self, r: f64) -> Result<f64, KernelError> {
        Self::check_radius(r)?;
        Ok(self.phi_unchecked(r))
    }

    pub fn phi1(&self, r: f64) -> Result<f64, KernelError> {
        Self::check_radius(r)?;
        self.require_first()?;
        Ok(self.phi1_unchecked(r))
    }

    pub fn phi2(&self, r: f64) -> Result<f64, KernelError> {
        Self::check_radius(r)?;
        self.require_second()?;
        Ok(self.phi2_unchecked(r))
    }

    pub(crate) fn require_first(&self) -> Result<(), KernelError> {
        if self.first_form.is_none() {
            return Err(KernelError::DerivativeUnavailable {
                order: 1,
                tau: self.tau,
            });
        }
        Ok(())
    }

    pub(crate) fn require_second(&self) -> Result<(), KernelError> {
        if self.second_form.is_none() {
            return Err(KernelError::DerivativeUnavailable {
                order: 2,
                tau: self.tau,
            });
        }
        Ok(())
    }

    #[inline]
    pub(crate) fn phi_unchecked(&self, r: f64) -> f64 {
        let s = r / self.support_scale;
        if s >= 1.0 {
            0.0
        } else {
            self.value_form.eval(s)
        }
    }

    /// Caller guarantees `τ >= 1`.
    #[inline]
    pub(crate) fn phi1_unchecked(&self, r: f64) -> f64 {
        let s = r / self.support_scale;
        match &self.first_form {
            Some(f) if s < 1.0 => f.eval(s) / (self.support_scale * self.support_scale),
            _ => 0.0,
        }
    }

    /// Caller guarantees `τ >= 2`.
    #[inline]
    pub(crate) fn phi2_unchecked(&self, r: f64) -> f64 {
        let s = r / self.support_scale;
        match &self.second_form {
            Some(f) if s < 1.0 => {
                let rho2 = self.support_scale * self.support_scale;
                f.eval(s) / (rho2 * rho2)
            }
            _ => 0.0,
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<(), KernelError> {
        if x.len() != self.dim {
            return Err(KernelError::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// `Φ(x) = φ(|x|)`.
    pub fn eval(&self, x: &[f64]) -> Result<f64, KernelError> {
        self.check_dim(x)?;
        Ok(self.phi_unchecked(norm(x)))
    }

    /// `∂Φ/∂x_m = φ1(|x|) x_m`.
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>, KernelError> {
        self.check_dim(x)?;
        self.require_first()?;
        let f1 = self.phi1_unchecked(norm(x));
        Ok(x.iter().map(|&xm| f1 * xm).collect())
    }

    /// `∂²Φ/∂x_m∂x_l = φ1 δ_{ml} + φ2 x_m x_l`.
    pub fn hessian(&self, x: &[f64]) -> Result<DMatrix<f64>, KernelError> {
        self.check_dim(x)?;
        self.require_second()?;
        let r = norm(x);
        let f1 = self.phi1_unchecked(r);
        let f2 = self.phi2_unchecked(r);
        Ok(DMatrix::from_fn(self.dim, self.dim, |m, l| {
            let off = f2 * (x[m] * x[l]);
            if m == l {
                f1 + off
            } else {
                off
            }
        }))
    }
}

#[inline]
pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Convenience constructor with the default degree cap.
pub fn build_kernel(dim: usize, tau: usize) -> Result<WendlandKernel, KernelError> {
    WendlandKernel::new(dim, tau)
}

/// Exact rational rendered as `num/den`.
pub fn format_rational(c: &BigRational) -> String {
    if c.denom().is_one() {
        c.numer().to_string()
    } else {
        format!("{}/{}", c.numer(), c.denom())
    }
}
