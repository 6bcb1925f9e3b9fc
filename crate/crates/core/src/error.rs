use thiserror::Error;

/// Errors produced by the numerical kernels and analysis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("matrix is rank deficient: singular value {index} is {value:e} (largest {max:e})")]
    RankDeficient { index: usize, value: f64, max: f64 },

    #[error("training diverged at step {step}")]
    Divergence { step: u64 },

    #[error("no batch size reached loss threshold {threshold}; lowest smoothed loss observed is {best:e}, try a higher threshold")]
    Unreachable { threshold: f64, best: f64 },

    #[error("{0}")]
    Degenerate(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
