use thiserror::Error;

/// Errors raised by the solvers and their building blocks.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An integrator stage or a sampled correction produced NaN/Inf.
    #[error("non-finite state (interval {interval:?}, iteration {iteration:?}, sample {sample:?})")]
    NonFiniteState {
        interval: Option<usize>,
        iteration: Option<usize>,
        sample: Option<usize>,
    },
    /// Cholesky factorisation failed even at the jitter ceiling.
    #[error("kernel matrix is ill-conditioned (relative jitter reached {jitter:e})")]
    IllConditioned { jitter: f64 },
    #[error("size mismatch: expected {expected}, got {actual}")]
    SizeMismatch { expected: usize, actual: usize },
    #[error("ensemble has zero spread in every coordinate")]
    DegenerateEnsemble,
    #[error("empty training dataset")]
    EmptyDataset,
    #[error("unknown system `{0}`")]
    UnknownSystem(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl Error {
    pub(crate) fn non_finite() -> Self {
        Error::NonFiniteState {
            interval: None,
            iteration: None,
            sample: None,
        }
    }

    /// Attach solver coordinates to a [`Error::NonFiniteState`]; other variants pass through.
    pub fn at(self, interval: usize, iteration: usize, sample: Option<usize>) -> Self {
        match self {
            Error::NonFiniteState { .. } => Error::NonFiniteState {
                interval: Some(interval),
                iteration: Some(iteration),
                sample,
            },
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
