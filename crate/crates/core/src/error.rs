use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid Jordan spec: {0}")]
    InvalidSpec(String),
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("unsupported rank {0} (exact representation handles r = 1, 2)")]
    UnsupportedRank(usize),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical accuracy failure: {0}")]
    Accuracy(String),
    #[error("eigensolver failure: {0}")]
    Eigensolver(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code: 3 for numerical failures, 2 for everything a user
    /// can fix by changing the inputs.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Accuracy(_) | Error::Eigensolver(_) => 3,
            _ => 2,
        }
    }
}
