use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("non-finite value at node {node:?} in {context}")]
    NonFinite { node: [usize; 3], context: String },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{0} is not implemented")]
    Unimplemented(&'static str),

    #[error("ghost value missing for interior node {node:?} (no boundary closure supplied)")]
    MissingGhost { node: [usize; 3] },

    #[error("zero pivot in ILU(0) factorization at row {row} (|pivot| = {pivot:.3e})")]
    ZeroPivot { row: usize, pivot: f64 },

    #[error("dimension mismatch: {0}")]
    DimMismatch(String),

    #[error("linear solve failed at {context}: residual {residual:.3e} after {iterations} iterations")]
    LinearSolve {
        context: String,
        residual: f64,
        iterations: usize,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
