//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Best model found before the optimizer stalled, attached to
/// [`Error::OptimizationStalled`] so callers can still recover it.
#[derive(Debug, Clone)]
pub struct StalledFit {
    pub model: crate::nl_lfr::NonlinearLfrModel,
    pub report: crate::ident::FitReport,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in `{field}`: expected {expected}, got {got}")]
    DimensionMismatch {
        field: &'static str,
        expected: String,
        got: String,
    },

    #[error("non-finite value in `{field}`")]
    NonFinite { field: &'static str },

    #[error("dc gain undefined: (I - A) is numerically singular (rcond = {rcond:.3e})")]
    SingularDcGain { rcond: f64 },

    #[error("non-causal transfer function: den[0] = 0")]
    NonCausal,

    #[error("invalid tolerance {0}: must be > 0")]
    InvalidTolerance(f64),

    #[error("normalized frequency {0} outside [0, 0.5]")]
    InvalidFrequency(f64),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate least-squares fit: design matrix rcond = {rcond:.3e}")]
    DegenerateFit { rcond: f64 },

    #[error("factorization residual {residual:.3e} exceeds bound {bound:.3e}")]
    FactorizationResidualTooLarge { residual: f64, bound: f64 },

    #[error("factorization offset c is not finite")]
    InvalidOffset,

    #[error("algebraic loop: the z <- w feedback path has a direct term")]
    AlgebraicLoop,

    #[error("simulation diverged at sample {at}")]
    DivergedSimulation { at: usize },

    #[error("offset relocation undefined: u -> z dc gain is zero while c != 0")]
    OffsetUndefined,

    #[error("all pole-zero allocation candidates failed")]
    AllCandidatesFailed,

    #[error("optimization stalled at the damping cap; best-so-far model attached")]
    OptimizationStalled { best: Box<StalledFit> },

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn dim(field: &'static str, expected: impl ToString, got: impl ToString) -> Self {
        Error::DimensionMismatch {
            field,
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }
}
