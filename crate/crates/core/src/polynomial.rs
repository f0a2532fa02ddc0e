//! Sparse polynomials over monomial letters.

use std::collections::BTreeMap;

use crate::error::{MomentError, Result};
use crate::linalg::Scalar;
use crate::monomials::{Kind, MultiIndex};

/// `Σ a_m x^m` with `m` a letter multi-index (`t` for real, `(z, z̄)` for
/// complex). Zero coefficients are never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial<T: Scalar> {
    num_vars: usize,
    terms: BTreeMap<MultiIndex, T>,
}

impl<T: Scalar> Polynomial<T> {
    pub fn zero(num_vars: usize) -> Self {
        Polynomial {
            num_vars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(num_vars: usize, c: T) -> Self {
        Self::monomial(num_vars, MultiIndex::zeros(T::KIND.letters(num_vars)), c)
    }

    pub fn monomial(num_vars: usize, index: MultiIndex, c: T) -> Self {
        let mut p = Self::zero(num_vars);
        p.add_term(index, c);
        p
    }

    pub fn from_terms(
        num_vars: usize,
        terms: impl IntoIterator<Item = (MultiIndex, T)>,
    ) -> Result<Self> {
        let mut p = Self::zero(num_vars);
        for (m, c) in terms {
            if m.len() != p.letters() {
                return Err(MomentError::DimensionMismatch(format!(
                    "term {m} in a polynomial with {} letters",
                    p.letters()
                )));
            }
            p.add_term(m, c);
        }
        Ok(p)
    }

    /// Real polynomial from `(exponents, coefficient)` pairs; a test and
    /// example convenience.
    pub fn from_real_terms(num_vars: usize, terms: &[(&[u32], f64)]) -> Result<Self> {
        Self::from_terms(
            num_vars,
            terms
                .iter()
                .map(|(e, c)| (MultiIndex::new(e.to_vec()), T::from_real(*c))),
        )
    }

    pub fn add_term(&mut self, index: MultiIndex, c: T) {
        let entry = self.terms.entry(index.clone()).or_insert_with(T::zero);
        *entry += c;
        if *entry == T::zero() {
            self.terms.remove(&index);
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn letters(&self) -> usize {
        T::KIND.letters(self.num_vars)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &T)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coefficient(&self, index: &MultiIndex) -> T {
        self.terms.get(index).copied().unwrap_or_else(T::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Total degree; the zero polynomial has degree 0.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(MultiIndex::degree).max().unwrap_or(0)
    }

    /// `k = floor((1 + deg p) / 2)`, the degree shift of the localizing matrix.
    pub fn half_degree(&self) -> u32 {
        self.degree().div_ceil(2)
    }

    pub fn scale(&self, c: T) -> Self {
        let mut p = Self::zero(self.num_vars);
        for (m, &a) in &self.terms {
            p.add_term(m.clone(), a * c);
        }
        p
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut p = self.clone();
        for (m, &a) in &other.terms {
            p.add_term(m.clone(), a);
        }
        p
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-T::one()))
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut p = Self::zero(self.num_vars);
        for (m, &a) in &self.terms {
            for (n, &b) in &other.terms {
                p.add_term(m + n, a * b);
            }
        }
        p
    }

    /// Formal partial derivative in one letter (`z_ℓ` or `z̄_ℓ` for complex data).
    pub fn derivative(&self, letter: usize) -> Self {
        let mut p = Self::zero(self.num_vars);
        for (m, &a) in &self.terms {
            let e = m.exponents()[letter];
            if e > 0 {
                let mut f = m.exponents().to_vec();
                f[letter] -= 1;
                p.add_term(MultiIndex::new(f), a * T::from_real(e as f64));
            }
        }
        p
    }

    /// `p̄`: conjugate coefficients and swap `z` with `z̄`.
    pub fn conj(&self) -> Self {
        let mut p = Self::zero(self.num_vars);
        for (m, &a) in &self.terms {
            p.add_term(m.conj(T::KIND), a.conjugate());
        }
        p
    }

    /// Value at a point of `R^N` or `C^d`.
    pub fn eval(&self, point: &[T]) -> T {
        let letters = T::letters(point);
        self.terms
            .iter()
            .fold(T::zero(), |acc, (m, &a)| acc + a * m.monomial_value(&letters))
    }

    /// `Σ |a_m| |x^m|` at a point, a scale for residual tests.
    pub fn eval_abs(&self, point: &[T]) -> f64 {
        let letters = T::letters(point);
        self.terms
            .iter()
            .map(|(m, a)| a.abs_val() * m.monomial_value(&letters).abs_val())
            .sum()
    }

    pub fn kind(&self) -> Kind {
        T::KIND
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::C64;

    #[test]
    fn derivative_by_letter() {
        let p: Polynomial<f64> = Polynomial::from_real_terms(2, &[(&[3, 1], 2.0), (&[0, 2], 1.0), (&[0, 0], 5.0)]).unwrap();
        let dx = Polynomial::from_real_terms(2, &[(&[2, 1], 6.0)]).unwrap();
        let dy = Polynomial::from_real_terms(2, &[(&[3, 0], 2.0), (&[0, 1], 2.0)]).unwrap();
        assert_eq!(p.derivative(0), dx);
        assert_eq!(p.derivative(1), dy);
        assert!(Polynomial::<f64>::constant(2, 1.0).derivative(0).is_zero());
    }

    fn ball(n: usize) -> Polynomial<f64> {
        let mut p = Polynomial::constant(n, 1.0);
        for l in 0..n {
            let mut e = vec![0; n];
            e[l] = 2;
            p.add_term(MultiIndex::new(e), -1.0);
        }
        p
    }

    #[test]
    fn degree_and_half_degree() {
        let p = ball(3);
        assert_eq!(p.degree(), 2);
        assert_eq!(p.half_degree(), 1);
        let cubic = Polynomial::<f64>::from_real_terms(1, &[(&[3], 1.0)]).unwrap();
        assert_eq!(cubic.half_degree(), 2);
        assert_eq!(Polynomial::<f64>::zero(2).half_degree(), 0);
    }

    #[test]
    fn cancellation_drops_terms() {
        let p = Polynomial::<f64>::from_real_terms(1, &[(&[1], 2.0), (&[1], -2.0)]).unwrap();
        assert!(p.is_zero());
    }

    #[test]
    fn eval_ball() {
        let p = ball(3);
        assert_eq!(p.eval(&[2.0, 0.0, 0.0]), -3.0);
        assert!(p.eval(&[0.6, 0.8, 0.0]).abs() < 1e-15);
    }

    #[test]
    fn complex_eval_of_modulus_squared() {
        // |z|^2 = z̄ z
        let p = Polynomial::monomial(1, MultiIndex::new(vec![1, 1]), C64::new(1.0, 0.0));
        let v = p.eval(&[C64::new(3.0, 4.0)]);
        assert!((v - C64::new(25.0, 0.0)).norm() < 1e-12);
        assert_eq!(p.conj(), p);
    }

    #[test]
    fn product() {
        let a = Polynomial::<f64>::from_real_terms(1, &[(&[0], 1.0), (&[1], 1.0)]).unwrap();
        let b = Polynomial::<f64>::from_real_terms(1, &[(&[0], 1.0), (&[1], -1.0)]).unwrap();
        let c = a.mul(&b);
        assert_eq!(c.coefficient(&MultiIndex::new(vec![2])), -1.0);
        assert_eq!(c.coefficient(&MultiIndex::new(vec![1])), 0.0);
        assert_eq!(c.num_terms(), 2);
    }
}
