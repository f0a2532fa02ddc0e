use crate::error::{MomentError, Result};
use crate::linalg::Scalar;

/// `μ = Σ ρ_j δ_{v_j}` with points in `R^N` (`f64`) or `C^d` (`C64`).
#[derive(Debug, Clone, PartialEq)]
pub struct AtomicMeasure<T: Scalar> {
    pub atoms: Vec<Vec<T>>,
    pub weights: Vec<f64>,
}

impl<T: Scalar> AtomicMeasure<T> {
    pub fn new(atoms: Vec<Vec<T>>, weights: Vec<f64>) -> Result<Self> {
        if atoms.len() != weights.len() {
            return Err(MomentError::DimensionMismatch(format!(
                "{} atoms but {} weights",
                atoms.len(),
                weights.len()
            )));
        }
        if let Some(first) = atoms.first() {
            if first.is_empty() || atoms.iter().any(|a| a.len() != first.len()) {
                return Err(MomentError::DimensionMismatch(
                    "atoms must share one positive dimension".into(),
                ));
            }
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
            return Err(MomentError::invalid(format!(
                "weights must be positive, found {w}"
            )));
        }
        Ok(AtomicMeasure { atoms, weights })
    }

    pub fn num_atoms(&self) -> usize {
        self.atoms.len()
    }

    pub fn num_vars(&self) -> usize {
        self.atoms.first().map_or(0, Vec::len)
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn min_separation(&self) -> f64 {
        let mut best = f64::INFINITY;
        for a in 0..self.atoms.len() {
            for b in a + 1..self.atoms.len() {
                best = best.min(distance(&self.atoms[a], &self.atoms[b]));
            }
        }
        best
    }
}

pub fn distance<T: Scalar>(a: &[T], b: &[T]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y).abs_val().powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Hausdorff distance between two finite point sets.
pub fn hausdorff<T: Scalar>(a: &[Vec<T>], b: &[Vec<T>]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return if a.len() == b.len() { 0.0 } else { f64::INFINITY };
    }
    let one_way = |x: &[Vec<T>], y: &[Vec<T>]| {
        x.iter()
            .map(|p| y.iter().map(|q| distance(p, q)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    one_way(a, b).max(one_way(b, a))
}

/// For each atom of `a`, the index of the nearest atom of `b`.
pub fn nearest_pairing<T: Scalar>(a: &[Vec<T>], b: &[Vec<T>]) -> Vec<usize> {
    a.iter()
        .map(|p| {
            (0..b.len())
                .min_by(|&i, &j| distance(p, &b[i]).total_cmp(&distance(p, &b[j])))
                .unwrap_or(0)
        })
        .collect()
}
