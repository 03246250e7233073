//! Error type shared by all lab operations.

use thiserror::Error;

/// Errors produced by grid construction, quadrature, and solvers.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid exponent p = {0}; need 1 < p < inf")]
    InvalidExponent(f64),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("grid mismatch between operands")]
    GridMismatch,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("signed measure not allowed here: {0}")]
    SignedMeasure(String),

    #[error("size cap exceeded: {0}")]
    SizeCap(String),

    #[error("under-resolved frequency k = {k}: need n+1 >= 8k, grid has n+1 = {m}")]
    UnderResolved { k: u32, m: usize },

    #[error("unknown fixture or family id `{0}`")]
    UnknownFixture(String),

    #[error("config error at {pointer}: {message}")]
    Config { pointer: String, message: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl LabError {
    pub(crate) fn non_finite(what: impl Into<String>) -> Self {
        LabError::NonFinite(what.into())
    }
}
