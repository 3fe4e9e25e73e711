use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// The banded kernel is not positive definite at this length scale.
    #[error(
        "length scale ratio l/delta = {ratio:.6} is not admissible (bound {bound:.6}); \
         smallest eigenvalue {min_eigenvalue:.3e}"
    )]
    Positivity {
        ratio: f64,
        bound: f64,
        min_eigenvalue: f64,
    },

    #[error("cholesky factorization failed at row {index}: pivot {pivot:.3e}")]
    Factorization { index: usize, pivot: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("io: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for errors caused by the numerics (admissibility, factorization)
    /// rather than by malformed arguments.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Positivity { .. } | Error::Factorization { .. } | Error::Fit(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
