//! Multi-indices and degree-lexicographic monomial bases.
//!
//! Complex monomials `z̄^i z^j` in `d` variables are stored as multi-indices over
//! `2d` commuting letters `(z_1, ..., z_d, z̄_1, ..., z̄_d)`, i.e. as the
//! concatenation `(j, i)`. With that layout the complex basis order is plain
//! degree-lex order on the letters: for `d = 2` it reads
//! `1, Z1, Z2, Zb1, Zb2, Z1^2, Z1Z2, Zb1Z1, Zb2Z1, Z2^2, ...`.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::ops::Add;

use serde::{Deserialize, Serialize};

use crate::error::{MomentError, Result};

/// Real moment problems live on `R^N`; complex ones on `C^d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Real,
    Complex,
}

impl Kind {
    /// Number of letters a monomial is written in.
    pub fn letters(self, num_vars: usize) -> usize {
        match self {
            Kind::Real => num_vars,
            Kind::Complex => 2 * num_vars,
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kind::Real => "real",
            Kind::Complex => "complex",
        })
    }
}

/// Exponent tuple. Ordered by total degree, then lexicographically with the
/// larger leading exponent first (`t1^2 < t1 t2 < t2^2` in basis order).
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        MultiIndex(exponents)
    }

    pub fn zeros(len: usize) -> Self {
        MultiIndex(vec![0; len])
    }

    /// Builds the letter layout `(hol, conj)` for the complex monomial `z̄^conj z^hol`.
    pub fn from_pair(conj: &MultiIndex, hol: &MultiIndex) -> Self {
        let mut e = hol.0.clone();
        e.extend_from_slice(&conj.0);
        MultiIndex(e)
    }

    /// Splits a complex letter index into `(i, j)` with the monomial `z̄^i z^j`.
    pub fn as_pair(&self) -> (MultiIndex, MultiIndex) {
        let d = self.0.len() / 2;
        (
            MultiIndex(self.0[d..].to_vec()),
            MultiIndex(self.0[..d].to_vec()),
        )
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    /// Componentwise `self <= other`, i.e. `t^self` divides `t^other`.
    pub fn divides(&self, other: &MultiIndex) -> bool {
        self.0.len() == other.0.len() && self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    pub fn checked_sub(&self, other: &MultiIndex) -> Option<MultiIndex> {
        if !other.divides(self) {
            return None;
        }
        Some(MultiIndex(
            self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect(),
        ))
    }

    /// Conjugation of a monomial: identity for real letters, swaps the
    /// `z` and `z̄` halves for complex ones.
    pub fn conj(&self, kind: Kind) -> MultiIndex {
        match kind {
            Kind::Real => self.clone(),
            Kind::Complex => {
                let d = self.0.len() / 2;
                let mut e = self.0[d..].to_vec();
                e.extend_from_slice(&self.0[..d]);
                MultiIndex(e)
            }
        }
    }

    /// Greedy split from the first coordinate: returns `(head, rest)` with
    /// `|head| = min(|self|, bound)`.
    pub fn greedy_prefix(&self, bound: u32) -> (MultiIndex, MultiIndex) {
        let mut left = bound;
        let mut head = Vec::with_capacity(self.0.len());
        for &e in &self.0 {
            let take = e.min(left);
            head.push(take);
            left -= take;
        }
        let rest = self.0.iter().zip(&head).map(|(a, b)| a - b).collect();
        (MultiIndex(head), MultiIndex(rest))
    }

    /// Appends a zero exponent (embedding into one more variable).
    pub fn extended(&self) -> MultiIndex {
        let mut e = self.0.clone();
        e.push(0);
        MultiIndex(e)
    }

    pub fn monomial_value<T: crate::Scalar>(&self, letters: &[T]) -> T {
        self.0
            .iter()
            .zip(letters)
            .fold(T::one(), |acc, (&e, &x)| acc * x.powi(e as i32))
    }
}

impl Add for &MultiIndex {
    type Output = MultiIndex;

    fn add(self, rhs: &MultiIndex) -> MultiIndex {
        debug_assert_eq!(self.0.len(), rhs.0.len());
        MultiIndex(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (k, e) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, ")")
    }
}

impl From<Vec<u32>> for MultiIndex {
    fn from(v: Vec<u32>) -> Self {
        MultiIndex(v)
    }
}

/// `(0,...,0,1,0,...,0)` with the 1 at `position` (1-based).
pub fn unit_index(num_vars: usize, position: usize) -> Result<MultiIndex> {
    if position == 0 || position > num_vars {
        return Err(MomentError::invalid(format!(
            "unit index position {position} outside 1..={num_vars}"
        )));
    }
    let mut e = vec![0; num_vars];
    e[position - 1] = 1;
    Ok(MultiIndex(e))
}

pub fn binomial(n: u64, k: u64) -> u64 {
    let k = k.min(n - k.min(n));
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

pub fn basis_size(num_vars: usize, max_degree: u32, kind: Kind) -> usize {
    let letters = kind.letters(num_vars) as u64;
    binomial(letters + max_degree as u64, letters) as usize
}

/// Ordered monomial basis indexing the rows and columns of moment matrices.
#[derive(Clone, Debug)]
pub struct MonomialBasis {
    kind: Kind,
    num_vars: usize,
    max_degree: u32,
    indices: Vec<MultiIndex>,
    positions: HashMap<MultiIndex, usize>,
}

impl PartialEq for MonomialBasis {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
            && self.num_vars == other.num_vars
            && self.max_degree == other.max_degree
    }
}

impl MonomialBasis {
    pub fn new(num_vars: usize, max_degree: u32, kind: Kind) -> Result<Self> {
        if num_vars == 0 {
            return Err(MomentError::invalid("a basis needs at least one variable"));
        }
        let letters = kind.letters(num_vars);
        let mut indices = Vec::with_capacity(basis_size(num_vars, max_degree, kind));
        let mut scratch = vec![0u32; letters];
        for degree in 0..=max_degree {
            compositions(degree, 0, &mut scratch, &mut indices);
        }
        let positions = indices
            .iter()
            .enumerate()
            .map(|(k, m)| (m.clone(), k))
            .collect();
        Ok(MonomialBasis {
            kind,
            num_vars,
            max_degree,
            indices,
            positions,
        })
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn letters(&self) -> usize {
        self.kind.letters(self.num_vars)
    }

    pub fn max_degree(&self) -> u32 {
        self.max_degree
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn index(&self, position: usize) -> &MultiIndex {
        &self.indices[position]
    }

    pub fn position(&self, index: &MultiIndex) -> Option<usize> {
        self.positions.get(index).copied()
    }

    /// Number of monomials of degree strictly below `degree`.
    pub fn degree_offset(&self, degree: u32) -> usize {
        if degree == 0 {
            0
        } else {
            basis_size(self.num_vars, degree - 1, self.kind)
        }
    }

    /// Positions (in basis order) of the monomials divisible by `anchor`.
    pub fn multiples_of(&self, anchor: &MultiIndex) -> Vec<usize> {
        self.indices
            .iter()
            .enumerate()
            .filter(|(_, m)| anchor.divides(m))
            .map(|(k, _)| k)
            .collect()
    }

    pub fn label(&self, position: usize) -> String {
        monomial_label(&self.indices[position], self.kind)
    }

    pub fn labels(&self) -> Vec<String> {
        (0..self.len()).map(|k| self.label(k)).collect()
    }
}

pub fn basis(num_vars: usize, max_degree: u32, kind: Kind) -> Result<MonomialBasis> {
    MonomialBasis::new(num_vars, max_degree, kind)
}

fn compositions(left: u32, slot: usize, scratch: &mut [u32], out: &mut Vec<MultiIndex>) {
    if slot + 1 == scratch.len() {
        scratch[slot] = left;
        out.push(MultiIndex(scratch.to_vec()));
        return;
    }
    for e in (0..=left).rev() {
        scratch[slot] = e;
        compositions(left - e, slot + 1, scratch, out);
    }
    scratch[slot] = 0;
}

/// Splits `z̄^r z^s` with `|r| + |s| <= 2k` as `z̄^i z^j · z̄^t z^u` where both
/// factors have degree at most `k`. Returns `((i, j), (t, u))`.
///
/// Case `|r|, |s| <= k` takes `i = r, j = 0`; otherwise the longer of `r`, `s`
/// is truncated greedily from its first coordinate down to degree `k`.
pub fn split_monomial(
    r: &MultiIndex,
    s: &MultiIndex,
    k: u32,
) -> Result<((MultiIndex, MultiIndex), (MultiIndex, MultiIndex))> {
    if r.len() != s.len() {
        return Err(MomentError::DimensionMismatch(format!(
            "split of {r} and {s}"
        )));
    }
    if r.degree() + s.degree() > 2 * k {
        return Err(MomentError::invalid(format!(
            "cannot split z̄^{r} z^{s} into two factors of degree <= {k}"
        )));
    }
    let zero = MultiIndex::zeros(r.len());
    if r.degree() <= k && s.degree() <= k {
        return Ok(((r.clone(), zero.clone()), (zero, s.clone())));
    }
    if r.degree() > k {
        let (i, t) = r.greedy_prefix(k);
        Ok(((i, zero), (t, s.clone())))
    } else {
        let (j, u) = s.greedy_prefix(k);
        Ok(((zero, j), (r.clone(), u)))
    }
}

/// Real analog of [`split_monomial`]: `i = r + s` with `|r|, |s| <= k`.
pub fn split_index(i: &MultiIndex, k: u32) -> Result<(MultiIndex, MultiIndex)> {
    if i.degree() > 2 * k {
        return Err(MomentError::invalid(format!(
            "cannot split t^{i} into two factors of degree <= {k}"
        )));
    }
    Ok(i.greedy_prefix(k))
}

const XYZ: [&str; 3] = ["X", "Y", "Z"];

/// Human-readable monomial label: `1`, `X`, `XY`, `Z^2`, `T4^3`, `Zb1Z2`, ...
pub fn monomial_label(index: &MultiIndex, kind: Kind) -> String {
    if index.degree() == 0 {
        return "1".to_string();
    }
    let names: Vec<String> = match kind {
        Kind::Real if index.len() <= 3 => XYZ[..index.len()].iter().map(|s| s.to_string()).collect(),
        Kind::Real => (1..=index.len()).map(|k| format!("T{k}")).collect(),
        Kind::Complex => {
            let d = index.len() / 2;
            if d == 1 {
                vec!["Z".to_string(), "Zb".to_string()]
            } else {
                (1..=d)
                    .map(|k| format!("Z{k}"))
                    .chain((1..=d).map(|k| format!("Zb{k}")))
                    .collect()
            }
        }
    };
    let mut out = String::new();
    let order: Vec<usize> = match kind {
        Kind::Real => (0..index.len()).collect(),
        // conjugate letters first, as in `Zb1 Z1`
        Kind::Complex => {
            let d = index.len() / 2;
            (d..2 * d).chain(0..d).collect()
        }
    };
    for k in order {
        let e = index.exponents()[k];
        match e {
            0 => {}
            1 => out.push_str(&names[k]),
            _ => out.push_str(&format!("{}^{e}", names[k])),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mi(v: &[u32]) -> MultiIndex {
        MultiIndex::new(v.to_vec())
    }

    #[test]
    fn real_order_three_vars_degree_two() {
        let b = basis(3, 2, Kind::Real).unwrap();
        let expected: Vec<MultiIndex> = [
            [0, 0, 0],
            [1, 0, 0],
            [0, 1, 0],
            [0, 0, 1],
            [2, 0, 0],
            [1, 1, 0],
            [1, 0, 1],
            [0, 2, 0],
            [0, 1, 1],
            [0, 0, 2],
        ]
        .iter()
        .map(|v| mi(v))
        .collect();
        assert_eq!(b.indices(), expected.as_slice());
        assert_eq!(
            b.labels(),
            ["1", "X", "Y", "Z", "X^2", "XY", "XZ", "Y^2", "YZ", "Z^2"]
        );
    }

    #[test]
    fn degree_zero_basis() {
        let b = basis(1, 0, Kind::Real).unwrap();
        assert_eq!(b.indices(), &[mi(&[0])]);
    }

    #[test]
    fn complex_order_matches_listed_d2_n2() {
        let b = basis(2, 2, Kind::Complex).unwrap();
        assert_eq!(b.len(), 15);
        // (conj, hol) pairs in the printed order 1, Z1, Z2, Zb1, Zb2, Z1^2, Z1Z2,
        // Zb1Z1, Zb2Z1, Z2^2, Zb1Z2, Zb2Z2, Zb1^2, Zb1Zb2, Zb2^2
        let expected: [([u32; 2], [u32; 2]); 15] = [
            ([0, 0], [0, 0]),
            ([0, 0], [1, 0]),
            ([0, 0], [0, 1]),
            ([1, 0], [0, 0]),
            ([0, 1], [0, 0]),
            ([0, 0], [2, 0]),
            ([0, 0], [1, 1]),
            ([1, 0], [1, 0]),
            ([0, 1], [1, 0]),
            ([0, 0], [0, 2]),
            ([1, 0], [0, 1]),
            ([0, 1], [0, 1]),
            ([2, 0], [0, 0]),
            ([1, 1], [0, 0]),
            ([0, 2], [0, 0]),
        ];
        for (k, (conj, hol)) in expected.iter().enumerate() {
            let (i, j) = b.index(k).as_pair();
            assert_eq!((i.exponents(), j.exponents()), (&conj[..], &hol[..]), "position {k}");
        }
        assert_eq!(b.label(7), "Zb1Z1");
    }

    #[test]
    fn sizes() {
        assert_eq!(basis_size(3, 1, Kind::Real), 4);
        assert_eq!(basis_size(5, 0, Kind::Real), 1);
        assert_eq!(basis_size(2, 2, Kind::Complex), 15);
        for n in 1..=6usize {
            for deg in 0..=6u32 {
                let direct = basis(n, deg, Kind::Real).unwrap().len();
                assert_eq!(basis_size(n, deg, Kind::Real), direct);
                // C(N+n, N) by multiplicative formula
                let mut c = 1u64;
                for i in 1..=n as u64 {
                    c = c * (deg as u64 + i) / i;
                }
                assert_eq!(direct as u64, c);
            }
        }
    }

    #[test]
    fn unit_indices() {
        assert_eq!(unit_index(3, 2).unwrap(), mi(&[0, 1, 0]));
        assert_eq!(unit_index(1, 1).unwrap(), mi(&[1]));
        assert_eq!(unit_index(4, 4).unwrap(), mi(&[0, 0, 0, 1]));
        assert!(unit_index(3, 0).is_err());
        assert!(unit_index(3, 4).is_err());
    }

    #[test]
    fn split_examples() {
        let ((i, j), (t, u)) = split_monomial(&mi(&[1]), &mi(&[1]), 1).unwrap();
        assert_eq!((i, j, t, u), (mi(&[1]), mi(&[0]), mi(&[0]), mi(&[1])));

        let ((i, j), (t, u)) = split_monomial(&mi(&[0]), &mi(&[0]), 0).unwrap();
        assert_eq!((i, j, t, u), (mi(&[0]), mi(&[0]), mi(&[0]), mi(&[0])));

        let ((i, j), (t, u)) = split_monomial(&mi(&[3]), &mi(&[0]), 2).unwrap();
        assert_eq!((i, j, t, u), (mi(&[2]), mi(&[0]), mi(&[1]), mi(&[0])));

        assert!(split_monomial(&mi(&[3]), &mi(&[2]), 2).is_err());
    }

    #[test]
    fn greedy_split_is_lexicographically_first_admissible() {
        // enumerate every admissible i <= r (j = 0) for r = (3,), s = (0,), k = 2
        let r = mi(&[3]);
        let mut admissible: Vec<u32> = (0..=3u32)
            .filter(|&i| i <= 2 && (3 - i) <= 2)
            .collect();
        admissible.sort_by(|a, b| b.cmp(a));
        let ((i, _), _) = split_monomial(&r, &mi(&[0]), 2).unwrap();
        assert_eq!(i.exponents()[0], admissible[0]);
    }

    #[test]
    fn positions_round_trip() {
        let b = basis(3, 3, Kind::Real).unwrap();
        for (k, m) in b.indices().iter().enumerate() {
            assert_eq!(b.position(m), Some(k));
        }
        for w in b.indices().windows(2) {
            assert!(w[0] < w[1]);
        }
    }

    #[test]
    fn multiples_follow_anchor_walk() {
        let b = basis(3, 2, Kind::Real).unwrap();
        let x = mi(&[1, 0, 0]);
        let labels: Vec<String> = b.multiples_of(&x).iter().map(|&p| b.label(p)).collect();
        assert_eq!(labels, ["X", "X^2", "XY", "XZ"]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn split_recombines(r in proptest::collection::vec(0u32..4, 1..4), seed in 0u32..1000) {
                let d = r.len();
                let s: Vec<u32> = (0..d).map(|k| (seed >> k) % 3).collect();
                let r = MultiIndex::new(r);
                let s = MultiIndex::new(s);
                let total = r.degree() + s.degree();
                let k = total.div_ceil(2) + seed % 2;
                let ((i, j), (t, u)) = split_monomial(&r, &s, k).unwrap();
                prop_assert_eq!(&(&i + &t), &r);
                prop_assert_eq!(&(&j + &u), &s);
                prop_assert!(i.degree() + j.degree() <= k);
                prop_assert!(t.degree() + u.degree() <= k);
            }

            #[test]
            fn real_split_recombines(v in proptest::collection::vec(0u32..4, 1..5)) {
                let i = MultiIndex::new(v);
                let k = i.degree().div_ceil(2);
                let (r, s) = split_index(&i, k).unwrap();
                prop_assert_eq!(&(&r + &s), &i);
                prop_assert!(r.degree() <= k && s.degree() <= k);
            }
        }
    }
}
