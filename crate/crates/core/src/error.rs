use ndarray_linalg::error::LinalgError;

/// Errors raised by the analysis library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid range: lo ({lo}) must be strictly below hi ({hi})")]
    InvalidRange { lo: f64, hi: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("signal has zero variance")]
    ZeroVariance,

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("lag {lag} out of range for a series of length {len}")]
    LagOutOfRange { lag: usize, len: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error(
        "eigendecomposition unusable (condition number {cond:.3e}, reconstruction error {residual:.3e}); \
         use the sum backend"
    )]
    Defective { cond: f64, residual: f64 },

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("NARMA10 recursion diverged at step {step} (|y| = {value:.3e})")]
    Diverged { step: usize, value: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("linear algebra backend: {0}")]
    Linalg(#[from] LinalgError),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for errors caused by malformed configuration or arguments
    /// rather than by the numerics.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::Json(_)
                | Error::InvalidParameter { .. }
                | Error::InvalidRange { .. }
                | Error::LagOutOfRange { .. }
                | Error::LengthMismatch { .. }
                | Error::Empty(_)
        )
    }

    /// True for failures of the numerical machinery (solvers, integrators,
    /// convergence loops).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::ZeroVariance
                | Error::Defective { .. }
                | Error::Singular(_)
                | Error::Numerical(_)
                | Error::NoConvergence(_)
                | Error::Diverged { .. }
                | Error::Linalg(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
