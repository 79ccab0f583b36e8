//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    Domain(String),

    #[error("invalid model: {0}")]
    Model(String),

    #[error("invalid probe parameters: {0}")]
    Probe(String),

    #[error("linear solver failure: {0}")]
    Solver(String),

    #[error("cgo construction failed: {0}")]
    Cgo(String),

    #[error("indicator: {0}")]
    Indicator(String),

    #[error("reconstruction: {0}")]
    Reconstruct(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("expression error: {0}")]
    Expr(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// CLI exit code category: 2 config, 3 solver, 4 empty reconstruction.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Expr(_) | Error::Domain(_) | Error::Model(_) => 2,
            Error::Solver(_) | Error::Cgo(_) => 3,
            Error::Reconstruct(_) => 4,
            _ => 1,
        }
    }
}
