//! Truncated K-moment problems: moment and localizing matrices, flat
//! extensions, and extraction of minimal atomic representing measures.

pub mod bridge;
pub mod cli;
pub mod cubature;
pub mod error;
pub mod extension;
pub mod io;
pub mod linalg;
pub mod localizing;
pub mod measure;
pub mod moments;
pub mod monomials;
pub mod polynomial;
pub mod scan;
pub mod solve;

pub use error::{ErrorClass, MomentError, Result};
pub use linalg::{Scalar, Tolerances, C64};
pub use measure::AtomicMeasure;
pub use moments::{MomentMatrix, MomentSequence};
pub use monomials::{Kind, MonomialBasis, MultiIndex};
pub use polynomial::Polynomial;
