//! Error type shared by all modules.

/// Errors produced by the CB-FMT library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },

    #[error("singular channel: |G_eq({bin})| = {magnitude:.3e}")]
    SingularChannel { bin: usize, magnitude: f64 },

    #[error("precondition violated: {0}")]
    PreconditionViolation(String),

    #[error(
        "design failed: no feasible solution in {restarts} restarts \
         (best objective {best_objective:.6}, best constraint residual {best_residual:.3e})"
    )]
    DesignFailure {
        restarts: usize,
        best_objective: f64,
        best_residual: f64,
    },

    #[error("pulse file: {0}")]
    PulseFile(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
