use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("dimension mismatch: expected {expected} values, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("field is not band-limited to |n| < {cutoff}: coefficient of size {magnitude:e} at n = ({n1}, {n2})")]
    NotBandLimited {
        cutoff: usize,
        n1: i64,
        n2: i64,
        magnitude: f64,
    },

    #[error("linear tables were built for the {found} model, expected {expected}")]
    ModelMismatch {
        expected: &'static str,
        found: &'static str,
    },

    #[error("objective diverged: {0}")]
    Divergent(String),

    #[error("malformed snapshot: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
