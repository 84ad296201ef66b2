use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("combined dimension {0} exceeds the supported maximum of 16")]
    DimensionOverflow(usize),

    #[error("invalid dimension {0}: must be one of 2, 4 or 16")]
    InvalidDimension(usize),

    #[error("unsupported photon slot pair ({0}, {1})")]
    UnsupportedSlots(usize, usize),

    #[error("target ket is not normalized (norm {0})")]
    UnnormalizedTarget(f64),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("measurement set is not informationally complete (rank {rank} of 16)")]
    IncompleteBasis { rank: usize },

    #[error("unknown measurement basis label `{0}`")]
    UnknownBasis(String),

    #[error("total coincidence counts are zero")]
    ZeroCounts,

    #[error("numeric failure: {0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
