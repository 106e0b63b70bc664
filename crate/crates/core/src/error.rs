//! Error type shared by every module in the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("operation unsupported for this kernel family: {0}")]
    UnsupportedKernel(&'static str),

    #[error("empty sample set: {0}")]
    EmptySamples(&'static str),

    #[error("non-finite value encountered in {context}")]
    NonFinite { context: &'static str },

    #[error("trajectory diverged at t = {t}: |state[{coord}]| = {value:.3e} exceeds {limit:.1e}")]
    Divergence {
        t: f64,
        coord: usize,
        value: f64,
        limit: f64,
        /// Every step recorded before the divergent one; its last entry is
        /// the last valid state.
        partial: Box<crate::odesim::Trajectory>,
    },

    #[error("eigenvalue iteration did not converge within {sweeps} sweeps (off-norm {off_norm:.3e})")]
    EigenNoConvergence { sweeps: usize, off_norm: f64 },

    #[error("training aborted: {0}")]
    TrainingAborted(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
