//! Dense numerical kernels shared by the moment modules.

use std::fmt;

use nalgebra::{ComplexField, DMatrix, DVector, SymmetricEigen};

use crate::error::{MomentError, Result};
use crate::monomials::Kind;

pub type C64 = nalgebra::Complex<f64>;

/// Field of matrix entries: `f64` for real problems, `C64` for complex ones.
pub trait Scalar: ComplexField<RealField = f64> + Copy + fmt::Debug + Send + Sync + 'static {
    const KIND: Kind;

    fn from_parts(re: f64, im: f64) -> Self;

    fn re(self) -> f64 {
        ComplexField::real(self)
    }

    fn im(self) -> f64 {
        ComplexField::imaginary(self)
    }

    fn abs_val(self) -> f64 {
        ComplexField::modulus(self)
    }

    /// Letter values of a point: `t` itself, or `(z, z̄)` in the complex case.
    fn letters(point: &[Self]) -> Vec<Self>;
}

impl Scalar for f64 {
    const KIND: Kind = Kind::Real;

    fn from_parts(re: f64, _im: f64) -> Self {
        re
    }

    fn letters(point: &[Self]) -> Vec<Self> {
        point.to_vec()
    }
}

impl Scalar for C64 {
    const KIND: Kind = Kind::Complex;

    fn from_parts(re: f64, im: f64) -> Self {
        C64::new(re, im)
    }

    fn letters(point: &[Self]) -> Vec<Self> {
        point
            .iter()
            .copied()
            .chain(point.iter().map(|z| z.conj()))
            .collect()
    }
}

/// Numerical thresholds used across the library. All are relative unless
/// noted on the field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Singular values at or below `rank * sigma_max` count as zero.
    pub rank: f64,
    /// Eigenvalues down to `-psd * max(1, sigma_max)` still count as nonnegative.
    pub psd: f64,
    /// Least-squares and structural residuals.
    pub residual: f64,
    /// Zero test for constraint values at atoms.
    pub boundary: f64,
    /// Two atoms closer than this (absolute) are a collision.
    pub merge: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rank: 1e-9,
            psd: 1e-10,
            residual: 1e-8,
            boundary: 1e-7,
            merge: 1e-7,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        let all = [self.rank, self.psd, self.residual, self.boundary, self.merge];
        if all.iter().all(|t| t.is_finite() && *t > 0.0) {
            Ok(())
        } else {
            Err(MomentError::invalid("tolerances must be positive and finite"))
        }
    }
}

pub fn singular_values<T: Scalar>(m: &DMatrix<T>) -> DVector<f64> {
    if m.is_empty() {
        return DVector::zeros(0);
    }
    m.clone().singular_values()
}

pub fn spectral_norm<T: Scalar>(m: &DMatrix<T>) -> f64 {
    singular_values(m).iter().fold(0.0, |a: f64, &s| a.max(s))
}

pub fn numerical_rank<T: Scalar>(m: &DMatrix<T>, tol_rel: f64) -> usize {
    let sv = singular_values(m);
    let smax = sv.iter().fold(0.0, |a: f64, &s| a.max(s));
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol_rel * smax).count()
}

/// Rank with the cutoff measured against `max(σ_max, scale)`, for matrices
/// whose natural size is known from elsewhere.
pub fn numerical_rank_scaled<T: Scalar>(m: &DMatrix<T>, tol_rel: f64, scale: f64) -> usize {
    let sv = singular_values(m);
    let top = sv.iter().fold(scale.max(0.0), |a: f64, &s| a.max(s));
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol_rel * top).count()
}

/// Eigenvalues of the Hermitian part of `m`, ascending.
pub fn hermitian_eigenvalues<T: Scalar>(m: &DMatrix<T>) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let h = hermitian_part(m);
    let mut ev: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn hermitian_part<T: Scalar>(m: &DMatrix<T>) -> DMatrix<T> {
    (m + m.adjoint()).scale(0.5)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsdReport {
    pub is_psd: bool,
    pub min_eigenvalue: f64,
}

pub fn psd_report<T: Scalar>(m: &DMatrix<T>, tol_rel: f64) -> PsdReport {
    let ev = hermitian_eigenvalues(m);
    let min_eigenvalue = ev.first().copied().unwrap_or(0.0);
    let scale = ev.iter().fold(1.0f64, |a, e| a.max(e.abs()));
    PsdReport {
        is_psd: min_eigenvalue >= -tol_rel * scale,
        min_eigenvalue,
    }
}

/// Minimum-norm least-squares solution of `a x = b`, truncating singular
/// values at or below `tol_rel * sigma_max`.
pub fn lstsq<T: Scalar>(a: &DMatrix<T>, b: &DMatrix<T>, tol_rel: f64) -> DMatrix<T> {
    if a.is_empty() || b.ncols() == 0 {
        return DMatrix::zeros(a.ncols(), b.ncols());
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().fold(0.0, |x: f64, &s| x.max(s));
    if smax == 0.0 {
        return DMatrix::zeros(a.ncols(), b.ncols());
    }
    svd.solve(b, tol_rel * smax)
        .expect("both singular vector sets were requested")
}

pub fn condition_number<T: Scalar>(m: &DMatrix<T>) -> f64 {
    let sv = singular_values(m);
    let smax = sv.iter().fold(0.0, |a: f64, &s| a.max(s));
    let smin = sv.iter().fold(f64::INFINITY, |a: f64, &s| a.min(s));
    if smin == 0.0 {
        f64::INFINITY
    } else {
        smax / smin
    }
}

/// Greedy choice of the first linearly independent columns, left to right.
/// A column is kept when its component orthogonal to the kept ones exceeds
/// `tol_rel` times the largest column norm.
pub fn independent_columns<T: Scalar>(m: &DMatrix<T>, tol_rel: f64) -> Vec<usize> {
    let scale = (0..m.ncols())
        .map(|j| m.column(j).norm())
        .fold(0.0f64, f64::max);
    if scale == 0.0 {
        return Vec::new();
    }
    let mut kept: Vec<usize> = Vec::new();
    let mut q: Vec<DVector<T>> = Vec::new();
    for j in 0..m.ncols() {
        let mut v: DVector<T> = m.column(j).into_owned();
        // two passes of modified Gram-Schmidt
        for _ in 0..2 {
            for u in &q {
                let c = u.dotc(&v);
                v -= u * c;
            }
        }
        let norm = v.norm();
        if norm > tol_rel * scale {
            q.push(v.unscale(norm));
            kept.push(j);
        }
    }
    kept
}

pub fn select_columns<T: Scalar>(m: &DMatrix<T>, cols: &[usize]) -> DMatrix<T> {
    DMatrix::from_fn(m.nrows(), cols.len(), |i, j| m[(i, cols[j])])
}

pub fn select<T: Scalar>(m: &DMatrix<T>, rows: &[usize], cols: &[usize]) -> DMatrix<T> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

pub fn max_abs<T: Scalar>(m: &DMatrix<T>) -> f64 {
    m.iter().fold(0.0, |a: f64, x| a.max(x.abs_val()))
}
