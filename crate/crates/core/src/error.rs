use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("kernel spacing {kernel} does not match grid spacing {grid}")]
    SpacingMismatch { kernel: f64, grid: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("operator matrix of {n}x{n} exceeds the configured cap of {cap} rows")]
    MatrixTooLarge { n: usize, cap: usize },

    #[error("operator has no positive eigenvalue (lambda_max = {lambda_max})")]
    NoPositiveEigenvalue { lambda_max: f64 },

    #[error("eigensolver did not converge: worst residual {worst_residual:.3e} after {iterations} iterations")]
    Convergence { worst_residual: f64, iterations: usize },

    #[error("numerical blow-up at step {step}: non-finite value at index {index}")]
    BlowUp { step: usize, index: usize },

    #[error("config error in {path}: {message}")]
    Config { path: String, message: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("no dominant wavelength: {0}")]
    NoPeak(String),

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
