use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite input: {0}")]
    NonFinite(&'static str),

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: String,
        got: String,
    },

    #[error("shrinkage coefficient {0} outside [0, 1]")]
    AlphaOutOfRange(f64),

    /// `R(0) = Q` is rank deficient. Callers may retry with a floored `α`.
    #[error("R(alpha) is singular (min eigenvalue {min_eig:e}, tolerance {tol:e})")]
    SingularShrinkage { min_eig: f64, tol: f64 },

    #[error("matrix is singular: {0}")]
    Singular(&'static str),

    #[error("non-finite gradient at iteration {iteration} (alpha = {alpha})")]
    NonFiniteGradient { iteration: usize, alpha: f64 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn dim_err(
    context: &'static str,
    expected: impl std::fmt::Display,
    got: impl std::fmt::Display,
) -> Error {
    Error::Dimension {
        context,
        expected: expected.to_string(),
        got: got.to_string(),
    }
}
