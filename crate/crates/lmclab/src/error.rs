//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("phase {theta} outside the admissible range (-{n}*pi/2, {n}*pi/2)")]
    InvalidPhase { theta: f64, n: usize },

    #[error("invalid family parameters: {0}")]
    InvalidFamily(String),

    #[error("eigen-decomposition did not converge")]
    EigenNoConvergence,

    #[error("linear solver failed: {0}")]
    SolverFailure(String),

    #[error("time step {dt} exceeds the explicit stability bound {bound}")]
    UnstableTimeStep { dt: f64, bound: f64 },

    #[error("the concavification requires dimension n >= 3, got n = {0}")]
    DimensionTooLow(usize),

    #[error("rotation by {angle} rad is degenerate: {reason}")]
    RotationDegenerate { angle: f64, reason: String },

    #[error("configuration error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("i/o failure on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn invalid_input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}
