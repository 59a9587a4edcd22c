use thiserror::Error;

/// Errors raised anywhere in the library.
///
/// The variants split into two families that the CLI maps onto distinct exit
/// codes: argument/domain problems (bad input) and numerical failures
/// (optimizer, normalization, witness refusal).
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("range error: {what} (deepest supported generation k = {deepest_generation})")]
    GenerationRange { what: String, deepest_generation: usize },

    #[error("range error: {0}")]
    Range(String),

    #[error("inconclusive: {0}")]
    Inconclusive(String),

    #[error("optimizer failure: {0}")]
    Optimizer(String),

    #[error("normalization inconsistency: relative spread {spread:.4e} exceeds {bound:.4e}")]
    Normalization { spread: f64, bound: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for errors caused by the numerics rather than by the caller's input.
    pub fn is_numerical_failure(&self) -> bool {
        matches!(
            self,
            Error::Optimizer(_) | Error::Normalization { .. } | Error::Inconclusive(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
