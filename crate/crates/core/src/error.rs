use thiserror::Error;

/// Errors produced anywhere in the estimation pipeline.
#[derive(Debug, Error)]
pub enum SdrError {
    #[error("ingestion error at row {row}, column {column}: {message}")]
    Ingestion {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error("dimension selection failed: {0}")]
    Selection(String),

    #[error("subspace metric undefined: {0}")]
    Metric(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl SdrError {
    /// Process exit code used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            SdrError::Parameter(_) => 1,
            SdrError::Ingestion { .. }
            | SdrError::Io(_)
            | SdrError::Dimension(_)
            | SdrError::Json(_) => 2,
            SdrError::Numerical(_)
            | SdrError::Estimation(_)
            | SdrError::Selection(_)
            | SdrError::Metric(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, SdrError>;
