use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("mode count must be at least 1")]
    ZeroModes,
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("photon number mismatch: input has {input}, output has {output}")]
    PhotonMismatch { input: usize, output: usize },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("index {index} out of range (limit {limit})")]
    IndexOutOfRange { index: usize, limit: usize },
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("matrix is not unitary (max deviation {0:e})")]
    NotUnitary(f64),
    #[error("invalid input state: {0}")]
    InvalidState(String),
    #[error("invalid parameter binding: {0}")]
    InvalidBinding(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("matrix closeness over {0} modes needs m! permutations; limit is 8 (use a heuristic search instead)")]
    TooManyModes(usize),
    #[error("dataset error: {0}")]
    Dataset(String),
    #[error("non-finite value at epoch {epoch}: {what}")]
    NonFinite { epoch: usize, what: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("config parse error in {path}: {message}")]
    ConfigParse { path: PathBuf, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
