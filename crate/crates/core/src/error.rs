use thiserror::Error;

use crate::monomials::MultiIndex;

pub type Result<T, E = MomentError> = std::result::Result<T, E>;

/// Broad failure classes; the CLI maps each one to an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Malformed or incomplete input.
    Input,
    /// The data admit no object of the requested kind.
    Infeasible,
    /// Floating point could not settle the answer.
    Numerical,
}

#[derive(Debug, Clone, Error)]
pub enum MomentError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("missing moments: {}", format_indices(.0))]
    MissingMoments(Vec<MultiIndex>),

    #[error("complex moment data not Hermitian: {0}")]
    NonHermitian(String),

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:.6e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("no flat extension with these odd moments: range residual {residual:.3e} exceeds {threshold:.3e}")]
    RangeFailure { residual: f64, threshold: f64 },

    #[error("C block is not a moment block: moment {index} deviates by {deviation:.3e} (threshold {threshold:.3e})")]
    StructureFailure {
        index: MultiIndex,
        deviation: f64,
        threshold: f64,
    },

    #[error("extension is not flat: rank {rank_ext} vs base rank {rank_base}")]
    NotFlat { rank_base: usize, rank_ext: usize },

    #[error("localizing matrix for constraint {constraint} is not positive semidefinite (min eigenvalue {min_eigenvalue:.6e})")]
    LocalizingNotPsd { constraint: usize, min_eigenvalue: f64 },

    #[error("rank drift at successive extension step {step}: expected {expected}, found {found}")]
    RankDrift {
        step: usize,
        expected: usize,
        found: usize,
    },

    #[error("numerically ambiguous: {0}")]
    Ambiguous(String),

    #[error("ill-conditioned system (condition estimate {condition:.3e}): {context}")]
    IllConditioned { condition: f64, context: String },

    #[error("not a representing measure: {0}")]
    NotRepresenting(String),

    #[error("atoms outside the semi-algebraic set: {0}")]
    OutsideSet(String),
}

impl MomentError {
    pub fn class(&self) -> ErrorClass {
        use MomentError::*;
        match self {
            InvalidArgument(_) | DimensionMismatch(_) | MissingMoments(_) | NonHermitian(_) => {
                ErrorClass::Input
            }
            NotPsd { .. }
            | RangeFailure { .. }
            | StructureFailure { .. }
            | NotFlat { .. }
            | LocalizingNotPsd { .. }
            | NotRepresenting(_)
            | OutsideSet(_) => ErrorClass::Infeasible,
            RankDrift { .. } | Ambiguous(_) | IllConditioned { .. } => ErrorClass::Numerical,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        MomentError::InvalidArgument(msg.into())
    }
}

fn format_indices(indices: &[MultiIndex]) -> String {
    const SHOWN: usize = 12;
    let mut out: Vec<String> = indices.iter().take(SHOWN).map(|i| i.to_string()).collect();
    if indices.len() > SHOWN {
        out.push(format!("... ({} total)", indices.len()));
    }
    out.join(", ")
}
