use thiserror::Error;

/// Errors produced by solvers, configuration parsing and output writing.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("singular tridiagonal system at row {row}")]
    SingularSystem { row: usize },

    #[error("singular diagonal block at spatial index {index}")]
    SingularBlock { index: usize },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:.3e})")]
    Nonconvergence {
        what: String,
        iterations: usize,
        residual: f64,
    },

    #[error("solver produced non-finite values at step {step} (t = {time})")]
    Instability { step: usize, time: f64 },

    #[error("non-finite values in {0}")]
    NonFinite(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Exit code for the CLI: config errors map to 2, solver failures to 3.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidArgument(_) => 2,
            _ => 3,
        }
    }
}
