use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("index ({i}, {j}) out of range for a {nx}x{ny} grid")]
    Index { i: usize, j: usize, nx: usize, ny: usize },

    #[error("dense storage of {requested} entries exceeds the limit of {limit}")]
    Capacity { requested: usize, limit: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("K_nu overflows f64 at nu = {nu}, x = {x:e}")]
    Saturation { nu: f64, x: f64 },

    /// A symmetric factorization failed; `detail` carries a condition diagnostic.
    #[error("conditioning failure: {detail}")]
    Conditioning { detail: String },

    #[error("iterate diverged at iteration {iter} (norm {norm:e})")]
    Divergence { iter: usize, norm: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn validation(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}
