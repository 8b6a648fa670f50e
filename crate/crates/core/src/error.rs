use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("probability mass drifted to {mass} in {context}")]
    MassDrift { context: &'static str, mass: f64 },

    #[error("invalid simplex: {0}")]
    InvalidSimplex(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("non-finite {what} at index {index}")]
    NonFinite { what: &'static str, index: usize },

    #[error("{stage} diverged at iteration {iteration}: {source}")]
    Diverged {
        stage: &'static str,
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("malformed container: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Numerical failures, as opposed to bad inputs or I/O.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::MassDrift { .. } | Error::NonFinite { .. } | Error::Diverged { .. })
    }
}
