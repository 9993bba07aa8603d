use thiserror::Error;

/// Errors raised by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("training diverged in restart {restart}: non-finite loss")]
    Diverged { restart: usize },

    #[error("numeric failure at index {index}: {message}")]
    Numeric { index: usize, message: String },

    #[error("kernel is not positive: offending eigenvalue {eigenvalue:e}")]
    NonPositiveKernel { eigenvalue: f64 },

    #[error("dissimilarity violation: {0}")]
    Dissimilarity(String),

    #[error("config: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for failures of the numerics (divergence, underflow, kernel
    /// positivity) as opposed to bad inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::Diverged { .. } | Error::Numeric { .. } | Error::NonPositiveKernel { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
