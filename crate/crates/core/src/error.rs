use thiserror::Error;

use crate::protocol::SessionStatus;

/// Errors raised by the simulator. Protocol aborts are not errors; they are
/// reported through [`SessionStatus`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SqkdError {
    #[error("unknown ket label `{0}`")]
    UnknownLabel(String),
    #[error("unknown basis `{0}`")]
    UnknownBasis(String),
    #[error("amplitude is not finite")]
    NonFinite,
    #[error("state is not normalized (squared norm {norm_sqr})")]
    NotNormalized { norm_sqr: f64 },
    #[error("vector is zero")]
    ZeroVector,
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("matrix is not unitary (unitarity residual {residual:.3e})")]
    NonUnitary { residual: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("no CTRL rounds to check")]
    NoCtrlRounds,
    #[error("insufficient SIFT rounds: need {needed}, have {available}")]
    InsufficientSift { needed: usize, available: usize },
    #[error("attack `{0}` has no finite branch enumeration")]
    UnsupportedAttack(&'static str),
    #[error("too few samples: {actual} (need at least {required})")]
    TooFewSamples { actual: u64, required: u64 },
    #[error("session did not complete: {0:?}")]
    SessionAborted(SessionStatus),
    #[error("internal contract violation: {0}")]
    Contract(String),
}

pub type Result<T, E = SqkdError> = std::result::Result<T, E>;
