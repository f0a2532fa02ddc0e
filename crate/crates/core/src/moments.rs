//! Moment sequences, the Riesz functional and moment matrices.
//!
//! Entry convention for every moment matrix: the entry in row `g`, column `f`
//! is `Λ(f ḡ)`, i.e. the moment keyed by `conj(g) + f`. For real data this is
//! `β_{g+f}`; for complex data it makes `⟨M f̂, ĝ⟩ = Λ(f ḡ)` hold.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{MomentError, Result};
use crate::linalg::{self, PsdReport, Scalar};
use crate::measure::AtomicMeasure;
use crate::monomials::{basis, Kind, MonomialBasis, MultiIndex};
use crate::polynomial::Polynomial;

/// Moments `β_i` (real) or `γ_{ij}` (complex, keyed by letters of `z̄^i z^j`).
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSequence<T: Scalar> {
    num_vars: usize,
    degree: u32,
    entries: BTreeMap<MultiIndex, T>,
}

impl<T: Scalar> MomentSequence<T> {
    pub fn new(num_vars: usize, degree: u32) -> Self {
        MomentSequence {
            num_vars,
            degree,
            entries: BTreeMap::new(),
        }
    }

    pub fn from_entries(
        num_vars: usize,
        degree: u32,
        entries: impl IntoIterator<Item = (MultiIndex, T)>,
    ) -> Result<Self> {
        let mut s = Self::new(num_vars, degree);
        for (m, v) in entries {
            s.insert(m, v)?;
        }
        Ok(s)
    }

    pub fn kind(&self) -> Kind {
        T::KIND
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn letters(&self) -> usize {
        T::KIND.letters(self.num_vars)
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn set_degree(&mut self, degree: u32) {
        self.degree = degree;
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn insert(&mut self, index: MultiIndex, value: T) -> Result<()> {
        if index.len() != self.letters() {
            return Err(MomentError::DimensionMismatch(format!(
                "moment index {index} in a sequence with {} letters",
                self.letters()
            )));
        }
        if index.degree() > self.degree {
            return Err(MomentError::invalid(format!(
                "moment index {index} exceeds the declared degree {}",
                self.degree
            )));
        }
        self.entries.insert(index, value);
        Ok(())
    }

    pub fn get(&self, index: &MultiIndex) -> Option<T> {
        self.entries.get(index).copied()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&MultiIndex, &T)> {
        self.entries.iter()
    }

    /// Looks up every index, failing with the full list of absent ones.
    pub fn lookup(&self, indices: &[MultiIndex]) -> Result<Vec<T>> {
        let missing: Vec<MultiIndex> = indices
            .iter()
            .filter(|m| !self.entries.contains_key(m))
            .cloned()
            .collect();
        if !missing.is_empty() {
            return Err(MomentError::MissingMoments(missing));
        }
        Ok(indices.iter().map(|m| self.entries[m]).collect())
    }

    /// All indices up to `degree` that have no value.
    pub fn missing_up_to(&self, degree: u32) -> Result<Vec<MultiIndex>> {
        Ok(basis(self.num_vars, degree, T::KIND)?
            .indices()
            .iter()
            .filter(|m| !self.entries.contains_key(m))
            .cloned()
            .collect())
    }

    pub fn check_complete(&self) -> Result<()> {
        let missing = self.missing_up_to(self.degree)?;
        if missing.is_empty() {
            Ok(())
        } else {
            Err(MomentError::MissingMoments(missing))
        }
    }

    /// Complex data: `γ₀₀ > 0` and `γ_{ji} = conj(γ_{ij})`. Real data: all
    /// values finite and `β₀ > 0`.
    pub fn check_hermitian(&self, tol_rel: f64) -> Result<()> {
        let zero = MultiIndex::zeros(self.letters());
        let scale = self
            .entries
            .values()
            .fold(1.0f64, |a, v| a.max(v.abs_val()));
        if let Some(v) = self.entries.values().find(|v| !(v.re().is_finite() && v.im().is_finite())) {
            return Err(MomentError::invalid(format!("non-finite moment {v:?}")));
        }
        match self.entries.get(&zero) {
            Some(v) if v.re() > 0.0 && v.im().abs() <= tol_rel * scale => {}
            Some(v) => {
                return Err(MomentError::NonHermitian(format!(
                    "zeroth moment must be real and positive, found {v:?}"
                )))
            }
            None => return Err(MomentError::MissingMoments(vec![zero])),
        }
        for (m, &v) in &self.entries {
            let c = m.conj(T::KIND);
            if let Some(&w) = self.entries.get(&c) {
                if (w - v.conjugate()).abs_val() > tol_rel * scale {
                    return Err(MomentError::NonHermitian(format!(
                        "moment {m} is {v:?} but its conjugate partner {c} is {w:?}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Copy restricted to indices of degree at most `degree`.
    pub fn truncated(&self, degree: u32) -> Self {
        MomentSequence {
            num_vars: self.num_vars,
            degree: degree.min(self.degree),
            entries: self
                .entries
                .iter()
                .filter(|(m, _)| m.degree() <= degree)
                .map(|(m, v)| (m.clone(), *v))
                .collect(),
        }
    }

    /// Entries of `other` override entries of `self`; the degree is the larger one.
    pub fn merged(&self, other: &Self) -> Result<Self> {
        if other.num_vars != self.num_vars {
            return Err(MomentError::DimensionMismatch(format!(
                "sequences in {} and {} variables",
                self.num_vars, other.num_vars
            )));
        }
        let mut out = self.clone();
        out.degree = self.degree.max(other.degree);
        for (m, v) in &other.entries {
            out.entries.insert(m.clone(), *v);
        }
        Ok(out)
    }

    /// Largest absolute difference over the common indices up to `degree`,
    /// relative to `1 + max |value|`.
    pub fn relative_difference(&self, other: &Self, degree: u32) -> f64 {
        let mut diff = 0.0f64;
        let mut scale = 1.0f64;
        for (m, v) in self.entries.iter().filter(|(m, _)| m.degree() <= degree) {
            if let Some(w) = other.entries.get(m) {
                diff = diff.max((*v - *w).abs_val());
                scale = scale.max(v.abs_val());
            }
        }
        diff / scale
    }
}

/// `Λ(p) = Σ a_m β_m`.
pub fn riesz<T: Scalar>(seq: &MomentSequence<T>, p: &Polynomial<T>) -> Result<T> {
    if p.num_vars() != seq.num_vars() {
        return Err(MomentError::DimensionMismatch(format!(
            "polynomial in {} variables, sequence in {}",
            p.num_vars(),
            seq.num_vars()
        )));
    }
    let keys: Vec<MultiIndex> = p.terms().map(|(m, _)| m.clone()).collect();
    let values = seq.lookup(&keys)?;
    Ok(p
        .terms()
        .zip(values)
        .fold(T::zero(), |acc, ((_, &a), v)| acc + a * v))
}

/// Labeled square matrix indexed by a monomial basis of degree `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentMatrix<T: Scalar> {
    basis: MonomialBasis,
    data: DMatrix<T>,
}

impl<T: Scalar> MomentMatrix<T> {
    pub fn from_parts(basis: MonomialBasis, data: DMatrix<T>) -> Result<Self> {
        if data.nrows() != basis.len() || data.ncols() != basis.len() {
            return Err(MomentError::DimensionMismatch(format!(
                "{}x{} data for a basis of length {}",
                data.nrows(),
                data.ncols(),
                basis.len()
            )));
        }
        Ok(MomentMatrix { basis, data })
    }

    pub fn basis(&self) -> &MonomialBasis {
        &self.basis
    }

    pub fn data(&self) -> &DMatrix<T> {
        &self.data
    }

    pub fn into_data(self) -> DMatrix<T> {
        self.data
    }

    pub fn n(&self) -> u32 {
        self.basis.max_degree()
    }

    pub fn source_degree(&self) -> u32 {
        2 * self.n()
    }

    pub fn num_vars(&self) -> usize {
        self.basis.num_vars()
    }

    pub fn size(&self) -> usize {
        self.basis.len()
    }

    /// Reads the moment keyed by `index` (degree at most `2n`) off the matrix.
    pub fn moment(&self, index: &MultiIndex) -> Option<T> {
        if index.len() != self.basis.letters() || index.degree() > self.source_degree() {
            return None;
        }
        let (col, rest) = index.greedy_prefix(self.n());
        let row = rest.conj(T::KIND);
        Some(self.data[(self.basis.position(&row)?, self.basis.position(&col)?)])
    }

    /// The moment sequence of degree `2n` read off the matrix.
    pub fn sequence(&self) -> Result<MomentSequence<T>> {
        let b = basis(self.num_vars(), self.source_degree(), T::KIND)?;
        let mut s = MomentSequence::new(self.num_vars(), self.source_degree());
        for m in b.indices() {
            let v = self.moment(m).expect("every index of degree <= 2n splits");
            s.insert(m.clone(), v)?;
        }
        Ok(s)
    }

    /// Top-left block indexed by the basis of degree `n`.
    pub fn leading(&self, n: u32) -> Result<MomentMatrix<T>> {
        if n > self.n() {
            return Err(MomentError::invalid(format!(
                "cannot take degree {n} block of M({})",
                self.n()
            )));
        }
        let b = basis(self.num_vars(), n, T::KIND)?;
        let k = b.len();
        MomentMatrix::from_parts(b, self.data.view((0, 0), (k, k)).into_owned())
    }

    pub fn labels(&self) -> Vec<String> {
        self.basis.labels()
    }
}

/// `M(n)` with entry `Λ(f ḡ)` in row `g`, column `f`.
pub fn build_moment_matrix<T: Scalar>(seq: &MomentSequence<T>, n: u32) -> Result<MomentMatrix<T>> {
    if 2 * n > seq.degree() {
        return Err(MomentError::invalid(format!(
            "M({n}) needs moments of degree {}, sequence has degree {}",
            2 * n,
            seq.degree()
        )));
    }
    let b = basis(seq.num_vars(), n, T::KIND)?;
    let missing = seq.missing_up_to(2 * n)?;
    if !missing.is_empty() {
        return Err(MomentError::MissingMoments(missing));
    }
    let conj: Vec<MultiIndex> = b.indices().iter().map(|g| g.conj(T::KIND)).collect();
    let data = DMatrix::from_fn(b.len(), b.len(), |r, c| {
        seq.get(&(&conj[r] + b.index(c))).expect("checked above")
    });
    MomentMatrix::from_parts(b, data)
}

pub fn rank<T: Scalar>(m: &MomentMatrix<T>, tol_rel: f64) -> usize {
    linalg::numerical_rank(m.data(), tol_rel)
}

pub fn psd_check<T: Scalar>(m: &MomentMatrix<T>, tol_rel: f64) -> PsdReport {
    linalg::psd_report(m.data(), tol_rel)
}

/// Coefficient vector of `p` in the basis of `m`.
pub fn coefficient_vector<T: Scalar>(basis: &MonomialBasis, p: &Polynomial<T>) -> Result<DVector<T>> {
    let mut v = DVector::zeros(basis.len());
    for (mono, &c) in p.terms() {
        let pos = basis.position(mono).ok_or_else(|| {
            MomentError::invalid(format!(
                "term {mono} is outside the degree-{} basis",
                basis.max_degree()
            ))
        })?;
        v[pos] = c;
    }
    Ok(v)
}

/// `p(T) = M p̂`, the column combination named by `p`.
pub fn column_poly_apply<T: Scalar>(m: &MomentMatrix<T>, p: &Polynomial<T>) -> Result<DVector<T>> {
    if p.num_vars() != m.num_vars() {
        return Err(MomentError::DimensionMismatch(format!(
            "polynomial in {} variables, matrix in {}",
            p.num_vars(),
            m.num_vars()
        )));
    }
    if p.degree() > m.n() {
        return Err(MomentError::invalid(format!(
            "degree {} polynomial applied to M({})",
            p.degree(),
            m.n()
        )));
    }
    Ok(m.data() * coefficient_vector(m.basis(), p)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecursiveReport {
    pub ok: bool,
    /// First violation: kernel polynomial and multiplier monomial.
    pub witness: Option<(Vec<(MultiIndex, f64)>, MultiIndex)>,
    pub max_residual: f64,
}

/// Checks that the kernel of `m` is closed under multiplication by monomials
/// within the degree bound.
pub fn recursively_generated_check<T: Scalar>(m: &MomentMatrix<T>, tol: f64) -> RecursiveReport {
    let data = m.data();
    let size = data.nrows();
    let mut report = RecursiveReport {
        ok: true,
        witness: None,
        max_residual: 0.0,
    };
    if size == 0 {
        return report;
    }
    let svd = data.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested");
    let smax = svd.singular_values.iter().fold(0.0f64, |a, &s| a.max(s));
    let scale = smax.max(1.0);
    let b = m.basis();
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > 1e-9 * smax && smax > 0.0 {
            continue;
        }
        // kernel vector as a polynomial; conj of the row of V^*
        let v: Vec<T> = (0..size).map(|j| v_t[(k, j)].conjugate()).collect();
        let vmax = v.iter().fold(0.0f64, |a, x| a.max(x.abs_val()));
        let deg = (0..size)
            .filter(|&j| v[j].abs_val() > 1e-10 * vmax)
            .map(|j| b.index(j).degree())
            .max()
            .unwrap_or(0);
        for q in b.indices().iter().filter(|q| q.degree() + deg <= m.n() && q.degree() > 0) {
            let mut shifted = DVector::zeros(size);
            for j in (0..size).filter(|&j| v[j].abs_val() > 1e-10 * vmax) {
                let pos = b.position(&(b.index(j) + q)).expect("degree bounded");
                shifted[pos] += v[j];
            }
            let r = (data * &shifted).norm() / scale;
            report.max_residual = report.max_residual.max(r);
            if r > tol && report.ok {
                report.ok = false;
                report.witness = Some((
                    (0..size)
                        .filter(|&j| v[j].abs_val() > 1e-10 * vmax)
                        .map(|j| (b.index(j).clone(), v[j].re()))
                        .collect(),
                    q.clone(),
                ));
            }
        }
    }
    report
}

/// Power moments `Σ ρ_j v_j^m` for every index up to `degree`.
pub fn from_measure<T: Scalar>(measure: &AtomicMeasure<T>, degree: u32) -> Result<MomentSequence<T>> {
    let num_vars = measure.num_vars();
    if num_vars == 0 {
        return Err(MomentError::invalid("measure has no atoms"));
    }
    let b = basis(num_vars, degree, T::KIND)?;
    let letters: Vec<Vec<T>> = measure.atoms.iter().map(|a| T::letters(a)).collect();
    let mut seq = MomentSequence::new(num_vars, degree);
    for m in b.indices() {
        let v = letters
            .iter()
            .zip(&measure.weights)
            .fold(T::zero(), |acc, (l, &w)| acc + m.monomial_value(l) * T::from_real(w));
        seq.insert(m.clone(), v)?;
    }
    // Hermitian symmetry exactly: self-conjugate moments are real
    if T::KIND == Kind::Complex {
        let keys: Vec<MultiIndex> = seq.entries.keys().cloned().collect();
        for m in keys {
            let c = m.conj(T::KIND);
            if c == m {
                let v = seq.entries[&m];
                seq.entries.insert(m, T::from_real(v.re()));
            } else if m < c {
                let v = seq.entries[&m];
                seq.entries.insert(c, v.conjugate());
            }
        }
    }
    Ok(seq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::C64;
    use std::f64::consts::PI;

    fn mi(v: &[u32]) -> MultiIndex {
        MultiIndex::new(v.to_vec())
    }

    fn ball_m1() -> MomentSequence<f64> {
        let mut s = MomentSequence::new(3, 2);
        for m in basis(3, 2, Kind::Real).unwrap().indices() {
            let e = m.exponents();
            let v = if m.degree() == 0 {
                4.0 * PI / 3.0
            } else if e.contains(&2) {
                4.0 * PI / 15.0
            } else {
                0.0
            };
            s.insert(m.clone(), v).unwrap();
        }
        s
    }

    #[test]
    fn riesz_on_ball_moments() {
        let s = ball_m1();
        let one = Polynomial::constant(3, 1.0);
        assert!((riesz(&s, &one).unwrap() - 4.0 * PI / 3.0).abs() < 1e-14);
        let r2 = Polynomial::from_real_terms(3, &[(&[2, 0, 0], 1.0), (&[0, 2, 0], 1.0), (&[0, 0, 2], 1.0)]).unwrap();
        assert!((riesz(&s, &r2).unwrap() - 4.0 * PI / 5.0).abs() < 1e-14);
        assert_eq!(riesz(&s, &Polynomial::zero(3)).unwrap(), 0.0);
    }

    #[test]
    fn ball_moment_matrix_is_diagonal() {
        let m = build_moment_matrix(&ball_m1(), 1).unwrap();
        let expected = [4.0 * PI / 3.0, 4.0 * PI / 15.0, 4.0 * PI / 15.0, 4.0 * PI / 15.0];
        for r in 0..4 {
            for c in 0..4 {
                let e = if r == c { expected[r] } else { 0.0 };
                assert!((m.data()[(r, c)] - e).abs() < 1e-15);
            }
        }
        assert_eq!(rank(&m, 1e-9), 4);
        assert!(psd_check(&m, 1e-10).is_psd);
        assert_eq!(m.labels(), ["1", "X", "Y", "Z"]);
    }

    #[test]
    fn point_mass_at_origin() {
        let mu = AtomicMeasure::new(vec![vec![0.0, 0.0]], vec![1.0]).unwrap();
        let s = from_measure(&mu, 4).unwrap();
        let m = build_moment_matrix(&s, 2).unwrap();
        for r in 0..m.size() {
            for c in 0..m.size() {
                assert_eq!(m.data()[(r, c)], if r == 0 && c == 0 { 1.0 } else { 0.0 });
            }
        }
        assert_eq!(rank(&m, 1e-9), 1);
    }

    #[test]
    fn two_point_power_sums() {
        let mu = AtomicMeasure::new(vec![vec![1.0], vec![-1.0]], vec![0.5, 0.5]).unwrap();
        let s = from_measure(&mu, 4).unwrap();
        let vals: Vec<f64> = (0..=4).map(|k| s.get(&mi(&[k])).unwrap()).collect();
        assert_eq!(vals, vec![1.0, 0.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn missing_moments_are_listed() {
        let mut s = MomentSequence::<f64>::new(1, 2);
        s.insert(mi(&[0]), 1.0).unwrap();
        match build_moment_matrix(&s, 1) {
            Err(MomentError::MissingMoments(v)) => assert_eq!(v, vec![mi(&[1]), mi(&[2])]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rank_of_two_atom_measure() {
        let mu = AtomicMeasure::new(vec![vec![0.3, -0.2], vec![-0.5, 0.9]], vec![1.0, 2.0]).unwrap();
        let m = build_moment_matrix(&from_measure(&mu, 2).unwrap(), 1).unwrap();
        assert_eq!(rank(&m, 1e-9), 2);
    }

    #[test]
    fn matrix_equals_sum_of_outer_products() {
        let mu = AtomicMeasure::new(
            vec![vec![0.3, -0.2], vec![-0.5, 0.9], vec![0.1, 0.7]],
            vec![1.0, 0.4, 1.5],
        )
        .unwrap();
        let m = build_moment_matrix(&from_measure(&mu, 4).unwrap(), 2).unwrap();
        let b = m.basis();
        let mut oracle = DMatrix::<f64>::zeros(b.len(), b.len());
        for (a, &w) in mu.atoms.iter().zip(&mu.weights) {
            let v = DVector::from_iterator(b.len(), b.indices().iter().map(|i| i.monomial_value(a)));
            oracle += &v * v.transpose() * w;
        }
        assert!((m.data() - oracle).norm() < 1e-13);
    }

    #[test]
    fn column_relation_vanishes_on_support() {
        // atoms on the line y = 2x
        let mu = AtomicMeasure::new(vec![vec![0.5, 1.0], vec![-0.3, -0.6], vec![0.2, 0.4]], vec![1.0, 1.0, 1.0]).unwrap();
        let m = build_moment_matrix(&from_measure(&mu, 4).unwrap(), 2).unwrap();
        let p = Polynomial::from_real_terms(2, &[(&[0, 1], 1.0), (&[1, 0], -2.0)]).unwrap();
        assert!(column_poly_apply(&m, &p).unwrap().norm() < 1e-14);
        assert!(column_poly_apply(&m, &Polynomial::zero(2)).unwrap().norm() == 0.0);
        let cubic = Polynomial::from_real_terms(2, &[(&[3, 0], 1.0)]).unwrap();
        assert!(column_poly_apply(&m, &cubic).is_err());
    }

    #[test]
    fn hankel_that_is_not_recursively_generated() {
        let s = MomentSequence::from_entries(
            1,
            4,
            [1.0, 0.0, 0.0, 0.0, 1.0].iter().enumerate().map(|(k, &v)| (mi(&[k as u32]), v)),
        )
        .unwrap();
        let m = build_moment_matrix(&s, 2).unwrap();
        let r = recursively_generated_check(&m, 1e-8);
        assert!(!r.ok);
        let (p, q) = r.witness.unwrap();
        assert_eq!(q, mi(&[1]));
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].0, mi(&[1]));
    }

    #[test]
    fn measure_matrices_are_recursively_generated() {
        let mu = AtomicMeasure::new(vec![vec![0.5], vec![-0.3]], vec![1.0, 2.0]).unwrap();
        let m = build_moment_matrix(&from_measure(&mu, 6).unwrap(), 3).unwrap();
        assert!(recursively_generated_check(&m, 1e-8).ok);
        let full = build_moment_matrix(&ball_m1(), 1).unwrap();
        let r = recursively_generated_check(&full, 1e-8);
        assert!(r.ok && r.witness.is_none());
    }

    #[test]
    fn complex_matrix_is_hermitian_with_expected_entries() {
        let mu = AtomicMeasure::new(
            vec![vec![C64::new(0.5, 0.2)], vec![C64::new(-0.1, 0.7)]],
            vec![1.0, 0.5],
        )
        .unwrap();
        let s = from_measure(&mu, 2).unwrap();
        s.check_hermitian(1e-12).unwrap();
        let m = build_moment_matrix(&s, 1).unwrap();
        assert_eq!(m.size(), 3);
        assert!((m.data() - m.data().adjoint()).norm() < 1e-15);
        // row Z, column Zb: Λ(z̄ · conj(z)) = Λ(z̄^2)
        let want: C64 = mu
            .atoms
            .iter()
            .zip(&mu.weights)
            .map(|(a, &w)| a[0].conj() * a[0].conj() * w)
            .sum();
        assert!((m.data()[(1, 2)] - want).norm() < 1e-15);
        // bilinear identity on monomials
        for r in 0..3 {
            for c in 0..3 {
                let f = m.basis().index(c);
                let g = m.basis().index(r);
                let lam: C64 = mu
                    .atoms
                    .iter()
                    .zip(&mu.weights)
                    .map(|(a, &w)| {
                        let l = C64::letters(a);
                        f.monomial_value(&l) * g.monomial_value(&l).conj() * w
                    })
                    .sum();
                assert!((m.data()[(r, c)] - lam).norm() < 1e-15);
            }
        }
        assert!(psd_check(&m, 1e-10).is_psd);
    }

    #[test]
    fn sequence_round_trip_through_matrix() {
        let s = ball_m1();
        let m = build_moment_matrix(&s, 1).unwrap();
        assert_eq!(m.sequence().unwrap(), s);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn measure(n_vars: usize) -> impl Strategy<Value = AtomicMeasure<f64>> {
            (1usize..6).prop_flat_map(move |r| {
                (
                    proptest::collection::vec(proptest::collection::vec(-1.0f64..1.0, n_vars), r),
                    proptest::collection::vec(0.1f64..2.0, r),
                )
                    .prop_map(|(a, w)| AtomicMeasure::new(a, w).unwrap())
            })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(100))]

            #[test]
            fn measure_matrices_are_psd_and_rank_bounded(
                (n, mu) in (1usize..4, 1u32..4).prop_flat_map(|(nv, n)| (Just(n), measure(nv))),
            ) {
                let m = build_moment_matrix(&from_measure(&mu, 2 * n).unwrap(), n).unwrap();
                prop_assert!(psd_check(&m, 1e-10).is_psd);
                prop_assert!(rank(&m, 1e-9) <= mu.num_atoms());
                prop_assert_eq!(m.data(), &m.data().transpose());
            }

            #[test]
            fn bilinear_identity(
                f in proptest::collection::vec(-1.0f64..1.0, 6),
                g in proptest::collection::vec(-1.0f64..1.0, 6),
                mu in measure(2),
            ) {
                let seq = from_measure(&mu, 4).unwrap();
                let m = build_moment_matrix(&seq, 2).unwrap();
                let b = m.basis();
                let fp = Polynomial::from_terms(2, b.indices().iter().cloned().zip(f.iter().copied())).unwrap();
                let gp = Polynomial::from_terms(2, b.indices().iter().cloned().zip(g.iter().copied())).unwrap();
                let lhs = (coefficient_vector(b, &gp).unwrap().transpose() * m.data() * coefficient_vector(b, &fp).unwrap())[(0, 0)];
                let rhs = riesz(&seq, &fp.mul(&gp.conj())).unwrap();
                prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
            }
        }
    }
}
