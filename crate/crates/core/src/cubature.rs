//! Degree-2 cubature data for the volume measure on the closed unit ball of
//! `R^3`, with the one-parameter family of degree-3 moments that makes the
//! flat extension `M(2)` a moment matrix.

use std::f64::consts::PI;

use crate::moments::MomentSequence;
use crate::monomials::{basis, Kind, MultiIndex};
use crate::polynomial::Polynomial;

#[derive(Debug, Clone)]
pub struct BallCubature {
    /// Moments through degree 2.
    pub moments: MomentSequence<f64>,
    /// Degree-3 moments for the chosen `b = β_(1,2,0)`.
    pub fragment: MomentSequence<f64>,
    /// `1 − x² − y² − z²`.
    pub constraints: Vec<Polynomial<f64>>,
}

/// `b` in `[(2/15)√(2/5)π, (4/15)√(2/5)π]` gives a 4-atomic cubature rule
/// inside the ball.
pub fn ball_cubature(b: f64) -> BallCubature {
    BallCubature {
        moments: ball_moments(),
        fragment: ball_fragment(b),
        constraints: vec![unit_ball(3)],
    }
}

pub fn ball_moments() -> MomentSequence<f64> {
    let mut s = MomentSequence::new(3, 2);
    for m in basis(3, 2, Kind::Real).expect("nonzero vars").indices() {
        let v = if m.degree() == 0 {
            4.0 * PI / 3.0
        } else if m.exponents().contains(&2) {
            4.0 * PI / 15.0
        } else {
            0.0
        };
        s.insert(m.clone(), v).expect("degree within 2");
    }
    s
}

pub fn ball_fragment(b: f64) -> MomentSequence<f64> {
    let mut s = MomentSequence::new(3, 3);
    let pi2 = PI * PI;
    for m in basis(3, 3, Kind::Real).expect("nonzero vars").indices() {
        if m.degree() != 3 {
            continue;
        }
        let v = match m.exponents() {
            [3, 0, 0] => (1125.0 * b * b - 16.0 * pi2) / (1125.0 * b),
            [1, 0, 2] => -16.0 * pi2 / (1125.0 * b),
            [1, 2, 0] => b,
            _ => 0.0,
        };
        s.insert(m.clone(), v).expect("degree 3");
    }
    s
}

/// `1 − Σ t_ℓ²`.
pub fn unit_ball(num_vars: usize) -> Polynomial<f64> {
    let mut p = Polynomial::constant(num_vars, 1.0);
    for l in 0..num_vars {
        let mut e = vec![0; num_vars];
        e[l] = 2;
        p.add_term(MultiIndex::new(e), -1.0);
    }
    p
}

/// Closed-form ends of the feasible interval for `b`.
pub fn feasible_interval() -> (f64, f64) {
    let c = (2.0f64 / 5.0).sqrt() * PI;
    (2.0 / 15.0 * c, 4.0 / 15.0 * c)
}
