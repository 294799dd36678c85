use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("index out of range: {0}")]
    Index(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid mesh: {0}")]
    Mesh(String),

    #[error("field has nonzero mean {mean:e} (tolerance {tol:e})")]
    NonzeroMean { mean: f64, tol: f64 },

    #[error("root finding did not converge: {0}")]
    NoConvergence(String),

    #[error("fixed-point iteration failed at level {level} after {iters} iterations (last update {update:e})")]
    FixedPoint { level: usize, iters: usize, update: f64 },

    #[error("missing data: {0}")]
    Missing(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}
