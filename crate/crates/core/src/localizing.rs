//! Localizing matrices `M_p(n)`, built from the Riesz functional and by
//! compressing `M(n)`.

use nalgebra::DMatrix;

use crate::error::{MomentError, Result};
use crate::linalg::{self, Scalar};
use crate::moments::{build_moment_matrix, MomentMatrix, MomentSequence};
use crate::monomials::{basis, split_index, split_monomial, Kind, MonomialBasis, MultiIndex};
use crate::polynomial::Polynomial;

/// `M_p(n)`, indexed by the basis of degree `n - k` with `k = floor((1 + deg p) / 2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalizingMatrix<T: Scalar> {
    pub poly: Polynomial<T>,
    pub half_degree: u32,
    pub basis: MonomialBasis,
    pub data: DMatrix<T>,
}

impl<T: Scalar> LocalizingMatrix<T> {
    pub fn size(&self) -> usize {
        self.basis.len()
    }
}

fn localizing_basis<T: Scalar>(
    seq: &MomentSequence<T>,
    p: &Polynomial<T>,
    n: u32,
) -> Result<(u32, MonomialBasis)> {
    if p.num_vars() != seq.num_vars() {
        return Err(MomentError::DimensionMismatch(format!(
            "polynomial in {} variables, sequence in {}",
            p.num_vars(),
            seq.num_vars()
        )));
    }
    let k = p.half_degree();
    if k > n {
        return Err(MomentError::invalid(format!(
            "M_p({n}) undefined for deg p = {} (needs n >= {k})",
            p.degree()
        )));
    }
    if 2 * n > seq.degree() {
        return Err(MomentError::invalid(format!(
            "M_p({n}) needs moments of degree {}, sequence has degree {}",
            2 * n,
            seq.degree()
        )));
    }
    Ok((k, basis(seq.num_vars(), n - k, T::KIND)?))
}

/// `Σ |a_m| ‖M(n)‖`, a bound on the spectral norm of `M_p(n')` for `n' ≤ n`.
pub fn localizing_scale<T: Scalar>(seq: &MomentSequence<T>, p: &Polynomial<T>, n: u32) -> Result<f64> {
    let m = build_moment_matrix(seq, n)?;
    let weight: f64 = p.terms().map(|(_, c)| c.abs_val()).sum();
    Ok(weight * linalg::spectral_norm(m.data()))
}

/// Entry `Λ(p f ḡ)` in row `g`, column `f`.
pub fn localize_direct<T: Scalar>(
    seq: &MomentSequence<T>,
    p: &Polynomial<T>,
    n: u32,
) -> Result<LocalizingMatrix<T>> {
    let (k, b) = localizing_basis(seq, p, n)?;
    let size = b.len();
    let terms: Vec<(MultiIndex, T)> = p.terms().map(|(m, &c)| (m.clone(), c)).collect();
    let mut keys = Vec::new();
    for g in b.indices() {
        let cg = g.conj(T::KIND);
        for f in b.indices() {
            for (m, _) in &terms {
                keys.push(&(&cg + f) + m);
            }
        }
    }
    keys.sort();
    keys.dedup();
    seq.lookup(&keys)?;
    let data = DMatrix::from_fn(size, size, |r, c| {
        let base = &b.index(r).conj(T::KIND) + b.index(c);
        terms.iter().fold(T::zero(), |acc, (m, a)| {
            acc + *a * seq.get(&(&base + m)).expect("looked up")
        })
    });
    Ok(LocalizingMatrix {
        poly: p.clone(),
        half_degree: k,
        basis: b,
        data,
    })
}

/// The `first..=last` (1-based) rows and columns of `m` whose indices are
/// multiples of the respective anchors, in basis order.
pub fn compress<T: Scalar>(
    m: &MomentMatrix<T>,
    row_anchor: &MultiIndex,
    col_anchor: &MultiIndex,
    first: usize,
    last: usize,
) -> Result<DMatrix<T>> {
    if first == 0 || last < first {
        return Err(MomentError::invalid(format!(
            "compression range {first}..={last} is empty or not 1-based"
        )));
    }
    let rows = m.basis().multiples_of(row_anchor);
    let cols = m.basis().multiples_of(col_anchor);
    if rows.len() < last || cols.len() < last {
        return Err(MomentError::invalid(format!(
            "anchors {row_anchor}/{col_anchor} have {}/{} multiples in M({}), need {last}",
            rows.len(),
            cols.len(),
            m.n()
        )));
    }
    let len = last - first + 1;
    Ok(DMatrix::from_fn(len, len, |r, c| {
        m.data()[(rows[first - 1 + r], cols[first - 1 + c])]
    }))
}

/// Row and column anchors for one monomial term of `p`.
///
/// The row anchor `A` and column anchor `B` satisfy `conj(A) + B = m` with
/// both of degree at most `k`, so the compressed entry in row `g`, column `f`
/// is the moment keyed by `conj(g) + f + m`.
pub fn term_anchors(m: &MultiIndex, k: u32, kind: Kind) -> Result<(MultiIndex, MultiIndex)> {
    match kind {
        Kind::Real => split_index(m, k),
        Kind::Complex => {
            let (r, s) = m.as_pair();
            let ((i, j), (t, u)) = split_monomial(&r, &s, k)?;
            // column z̄^i z^j; row z̄^u z^t so that its conjugate is z̄^t z^u
            Ok((MultiIndex::from_pair(&u, &t), MultiIndex::from_pair(&i, &j)))
        }
    }
}

/// `M_p(n) = Σ a_m [row anchor] M(n) [col anchor]` over the terms of `p`.
pub fn localize_by_compression<T: Scalar>(
    seq: &MomentSequence<T>,
    p: &Polynomial<T>,
    n: u32,
) -> Result<LocalizingMatrix<T>> {
    let (k, b) = localizing_basis(seq, p, n)?;
    let m = build_moment_matrix(seq, n)?;
    let tau = b.len();
    let mut data = DMatrix::zeros(tau, tau);
    for (mono, &a) in p.terms() {
        let (row, col) = term_anchors(mono, k, T::KIND)?;
        data += compress(&m, &row, &col, 1, tau)? * a;
    }
    Ok(LocalizingMatrix {
        poly: p.clone(),
        half_degree: k,
        basis: b,
        data,
    })
}
