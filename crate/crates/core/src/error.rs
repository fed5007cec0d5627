use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Iterative method failed to converge.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Requested accuracy not reached; carries the achieved estimate.
    #[error("accuracy not reached: {message} (achieved {achieved:e})")]
    Accuracy { message: String, achieved: f64 },

    /// Invalid configuration or input.
    #[error("configuration error: {0}")]
    Config(String),

    /// A computed object violates a structural invariant.
    #[error("validation failed: {0}")]
    Validation(String),

    /// Nearly coincident poles make the decomposition ill-conditioned.
    #[error("ill-conditioned: {0}")]
    Conditioning(String),

    /// Nonlinear solve failed during a time step.
    #[error("step {step} failed at t = {time:e}: {reason}")]
    Step {
        step: usize,
        time: f64,
        reason: String,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    /// True for failures of a numerical method (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Numerical(_)
                | Error::Accuracy { .. }
                | Error::Validation(_)
                | Error::Conditioning(_)
                | Error::Step { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
