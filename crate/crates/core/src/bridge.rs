//! Passage between complex moment data in `d` variables and real moment
//! data in `2d` variables.
//!
//! Real coordinates are `t = (x_1, ..., x_d, y_1, ..., y_d)` with
//! `z_i = x_i + i y_i`. `L` sends the coefficient vector of a complex
//! polynomial (in `z, z̄`) to the coefficient vector of the same function
//! written in `x, y`.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::error::{MomentError, Result};
use crate::linalg::C64;
use crate::measure::AtomicMeasure;
use crate::moments::MomentSequence;
use crate::monomials::{basis, Kind, MonomialBasis, MultiIndex};
use crate::polynomial::Polynomial;

const HERMITIAN_TOL: f64 = 1e-10;

type Expansion = BTreeMap<MultiIndex, C64>;

/// Expands a product of powers of linear forms. Each form lists
/// `(letter, coefficient)` pairs.
fn expand(letters: usize, factors: &[(Vec<(usize, C64)>, u32)]) -> Expansion {
    let mut acc = Expansion::new();
    acc.insert(MultiIndex::zeros(letters), C64::new(1.0, 0.0));
    for (form, power) in factors {
        for _ in 0..*power {
            let mut next = Expansion::new();
            for (m, c) in &acc {
                for &(pos, a) in form {
                    let mut e = m.exponents().to_vec();
                    e[pos] += 1;
                    *next.entry(MultiIndex::new(e)).or_default() += c * a;
                }
            }
            acc = next;
        }
    }
    acc.retain(|_, c| *c != C64::new(0.0, 0.0));
    acc
}

/// `(x+iy)^ℓ (x−iy)^k` in real monomials, for the complex letters `m`.
fn complex_to_real_expansion(d: usize, m: &MultiIndex) -> Expansion {
    let e = m.exponents();
    let i = C64::new(0.0, 1.0);
    let one = C64::new(1.0, 0.0);
    let mut factors = Vec::with_capacity(2 * d);
    for v in 0..d {
        factors.push((vec![(v, one), (d + v, i)], e[v]));
        factors.push((vec![(v, one), (d + v, -i)], e[d + v]));
    }
    expand(2 * d, &factors)
}

/// `x^a y^b` with `x = (z+z̄)/2`, `y = (z−z̄)/2i`, in complex letters.
fn real_to_complex_expansion(d: usize, j: &MultiIndex) -> Expansion {
    let e = j.exponents();
    let half = C64::new(0.5, 0.0);
    let ih = C64::new(0.0, 0.5);
    let mut factors = Vec::with_capacity(2 * d);
    for v in 0..d {
        factors.push((vec![(v, half), (d + v, half)], e[v]));
        factors.push((vec![(v, -ih), (d + v, ih)], e[d + v]));
    }
    expand(2 * d, &factors)
}

#[derive(Debug, Clone)]
pub struct BridgeMaps {
    pub d: usize,
    pub n: u32,
    pub l_blocks: Vec<DMatrix<C64>>,
    pub l: DMatrix<C64>,
}

fn block_diagonal(blocks: &[DMatrix<C64>]) -> DMatrix<C64> {
    let size: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(size, size);
    let mut at = 0;
    for b in blocks {
        out.view_mut((at, at), (b.nrows(), b.ncols())).copy_from(b);
        at += b.nrows();
    }
    out
}

fn slice(b: &MonomialBasis, j: u32) -> Vec<&MultiIndex> {
    b.indices().iter().filter(|m| m.degree() == j).collect()
}

pub fn build_l(d: usize, n: u32) -> Result<BridgeMaps> {
    if d == 0 {
        return Err(MomentError::invalid("the bridge needs d >= 1"));
    }
    let real = basis(2 * d, n, Kind::Real)?;
    let cplx = basis(d, n, Kind::Complex)?;
    let l_blocks: Vec<DMatrix<C64>> = (0..=n)
        .map(|j| {
            let rows = slice(&real, j);
            let cols = slice(&cplx, j);
            let mut blk = DMatrix::zeros(rows.len(), cols.len());
            for (c, m) in cols.iter().enumerate() {
                for (t, v) in complex_to_real_expansion(d, m) {
                    let r = rows.iter().position(|x| **x == t).expect("same degree slice");
                    blk[(r, c)] = v;
                }
            }
            blk
        })
        .collect();
    let l = block_diagonal(&l_blocks);
    Ok(BridgeMaps { d, n, l_blocks, l })
}

impl BridgeMaps {
    /// `L⁻¹` assembled from the substitution `q ↦ q∘τ`, not by inversion.
    pub fn inverse(&self) -> DMatrix<C64> {
        let real = basis(2 * self.d, self.n, Kind::Real).expect("validated in build_l");
        let cplx = basis(self.d, self.n, Kind::Complex).expect("validated in build_l");
        let mut out = DMatrix::zeros(cplx.len(), real.len());
        for (c, j) in real.indices().iter().enumerate() {
            for (m, v) in real_to_complex_expansion(self.d, j) {
                out[(cplx.position(&m).expect("same degree"), c)] = v;
            }
        }
        out
    }
}

/// The real sequence `β_j = Λ_γ(((z+z̄)/2)^{x-part} ((z−z̄)/2i)^{y-part})`.
pub fn gamma_to_beta(gamma: &MomentSequence<C64>) -> Result<MomentSequence<f64>> {
    gamma.check_hermitian(HERMITIAN_TOL)?;
    let d = gamma.num_vars();
    let degree = gamma.degree();
    let mut beta = MomentSequence::new(2 * d, degree);
    for j in basis(2 * d, degree, Kind::Real)?.indices() {
        let exp = real_to_complex_expansion(d, j);
        let keys: Vec<MultiIndex> = exp.keys().cloned().collect();
        let vals = gamma.lookup(&keys)?;
        let v: C64 = exp.values().zip(vals).map(|(c, g)| c * g).sum();
        beta.insert(j.clone(), v.re)?;
    }
    Ok(beta)
}

/// The complex sequence `γ_{kℓ} = Λ_β((x−iy)^k (x+iy)^ℓ)`.
pub fn beta_to_gamma(beta: &MomentSequence<f64>) -> Result<MomentSequence<C64>> {
    let n_real = beta.num_vars();
    if !n_real.is_multiple_of(2) {
        return Err(MomentError::invalid(format!(
            "{n_real} real variables is odd; embed into one more dimension first"
        )));
    }
    let d = n_real / 2;
    let degree = beta.degree();
    let zeroth = beta.lookup(&[MultiIndex::zeros(n_real)])?[0];
    if zeroth <= 0.0 {
        return Err(MomentError::invalid("zeroth moment must be positive"));
    }
    let mut gamma = MomentSequence::new(d, degree);
    for m in basis(d, degree, Kind::Complex)?.indices() {
        let exp = complex_to_real_expansion(d, m);
        let keys: Vec<MultiIndex> = exp.keys().cloned().collect();
        let vals = beta.lookup(&keys)?;
        let v: C64 = exp.values().zip(vals).map(|(c, b)| c * b).sum();
        gamma.insert(m.clone(), v)?;
    }
    Ok(gamma)
}

/// Adds one coordinate to an odd-dimensional sequence. Moments involving the
/// new coordinate are zero in every degree the input touches; missing
/// moments stay missing.
pub fn odd_embed(beta: &MomentSequence<f64>) -> Result<MomentSequence<f64>> {
    let n_real = beta.num_vars();
    if n_real.is_multiple_of(2) {
        return Err(MomentError::invalid(format!(
            "{n_real} real variables is already even"
        )));
    }
    let mut out = MomentSequence::new(n_real + 1, beta.degree());
    let mut degrees = std::collections::BTreeSet::new();
    for (m, &v) in beta.entries() {
        degrees.insert(m.degree());
        out.insert(m.extended(), v)?;
    }
    for t in basis(n_real + 1, beta.degree(), Kind::Real)?.indices() {
        if t.exponents()[n_real] > 0 && degrees.contains(&t.degree()) {
            out.insert(t.clone(), 0.0)?;
        }
    }
    Ok(out)
}

/// The same polynomial read in one more variable.
pub fn embed_polynomial(p: &Polynomial<f64>) -> Result<Polynomial<f64>> {
    Polynomial::from_terms(p.num_vars() + 1, p.terms().map(|(m, &c)| (m.extended(), c)))
}

/// Drops the last coordinate; atoms must lie on the hyperplane `t_N = 0`.
pub fn odd_project(measure: &AtomicMeasure<f64>, tol: f64) -> Result<AtomicMeasure<f64>> {
    let n = measure.num_vars();
    if n < 2 {
        return Err(MomentError::invalid("nothing to project from one variable"));
    }
    let mut atoms = Vec::with_capacity(measure.num_atoms());
    for (k, a) in measure.atoms.iter().enumerate() {
        if a[n - 1].abs() > tol {
            return Err(MomentError::OutsideSet(format!(
                "atom {k} has last coordinate {:.3e}, expected 0",
                a[n - 1]
            )));
        }
        atoms.push(a[..n - 1].to_vec());
    }
    AtomicMeasure::new(atoms, measure.weights.clone())
}

/// `z ↦ (Re z, Im z)` applied atom by atom.
pub fn measure_to_real(measure: &AtomicMeasure<C64>) -> Result<AtomicMeasure<f64>> {
    let atoms = measure
        .atoms
        .iter()
        .map(|a| a.iter().map(|z| z.re).chain(a.iter().map(|z| z.im)).collect())
        .collect();
    AtomicMeasure::new(atoms, measure.weights.clone())
}

/// `(x, y) ↦ x + iy` applied atom by atom.
pub fn measure_to_complex(measure: &AtomicMeasure<f64>) -> Result<AtomicMeasure<C64>> {
    let n = measure.num_vars();
    if !n.is_multiple_of(2) {
        return Err(MomentError::invalid(format!("{n} real variables is odd")));
    }
    let d = n / 2;
    let atoms = measure
        .atoms
        .iter()
        .map(|a| (0..d).map(|v| C64::new(a[v], a[d + v])).collect())
        .collect();
    AtomicMeasure::new(atoms, measure.weights.clone())
}
