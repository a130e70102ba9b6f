use thiserror::Error;

/// Errors raised by the group, frame and certification layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("product leaves the carrier of the truncated group: {0}")]
    OutOfCarrier(String),

    #[error("neighborhood is not symmetric (U != U^-1)")]
    NonSymmetricNeighborhood,

    #[error("neighborhood does not contain the identity")]
    MissingIdentity,

    #[error("invalid group description: {0}")]
    InvalidGroup(String),

    #[error("element {0} is not in the carrier")]
    NotInCarrier(String),

    #[error("representation requires a cyclic group: {0}")]
    UnsupportedGroup(String),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("window vector is zero")]
    ZeroWindow,

    #[error("mollified window is numerically zero (norm {0:e})")]
    ZeroResult(f64),

    #[error("system is not a frame: lower bound {lower:e} vs upper bound {upper:e}")]
    NotAFrame { lower: f64, upper: f64 },

    #[error("length mismatch: expected {expected} vectors, got {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("operator is not positive: smallest eigenvalue {0:e}")]
    NotPositive(f64),

    #[error("no candidate L reaches the threshold {threshold:e} (best worst-case error {best:e})")]
    NoAdmissibleL { threshold: f64, best: f64 },

    #[error("HAP precondition unmet: no candidate L reaches eps*||h|| = {threshold:e}")]
    HapPreconditionUnmet { threshold: f64 },

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
