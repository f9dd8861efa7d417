use thiserror::Error;

use crate::solver::SolverError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("invalid instance:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("uncertainty budget violated: {0}")]
    Budget(String),
    #[error("candidate count {count} exceeds the cap of {cap}")]
    CapExceeded { count: u128, cap: u128 },
    #[error("estimation failed: {0}")]
    Estimation(String),
    #[error("model construction failed: {0}")]
    Model(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("solver returned {status:?} for `{model}`")]
    SolveStatus { model: String, status: crate::solver::SolveStatus },
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Error {
        Error::Context { context: context.into(), source: Box::new(self) }
    }

    /// Short machine-readable category, looking through added context.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
            Error::Validation(_) => "validation",
            Error::Dimension(_) => "dimension",
            Error::Budget(_) => "budget",
            Error::CapExceeded { .. } => "cap-exceeded",
            Error::Estimation(_) => "estimation",
            Error::Model(_) => "model",
            Error::Unsupported(_) => "unsupported",
            Error::SolveStatus { .. } => "solve-status",
            Error::Solver(_) => "solver",
            Error::Context { source, .. } => source.kind(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
