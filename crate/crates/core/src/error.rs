use crate::mesh::MeshId;

/// Errors produced by the numerical routines in this crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("field is bound to mesh {found:?}, expected {expected:?}")]
    MeshMismatch { expected: MeshId, found: MeshId },

    #[error("field has {found} values, mesh has {expected} nodes")]
    LengthMismatch { expected: usize, found: usize },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("conjugate gradient breakdown after {iterations} iterations: {reason}")]
    LinearSolveBreakdown { iterations: usize, reason: String },

    #[error("solve did not converge (residual {residual:e})")]
    NotConverged { residual: f64 },

    #[error("insufficient data: {usable} usable records, need at least {needed}")]
    InsufficientData { usable: usize, needed: usize },

    #[error("unsupported schema version {found} (expected {expected})")]
    SchemaVersion { expected: u32, found: u32 },

    #[error("malformed input: {0}")]
    Malformed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
