use thiserror::Error;

/// Errors raised by the reconstruction engine.
#[derive(Debug, Error)]
pub enum PatError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid medium: {0}")]
    InvalidMedium(String),

    #[error("invalid sensor geometry: {0}")]
    InvalidSensors(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A field became non-finite while time stepping.
    #[error("solver diverged at time index {step}")]
    Divergence { step: usize },

    /// The objective grew by more than the allowed factor over its start value.
    #[error("optimizer diverged at iteration {iteration}: F = {value:e} (start {start:e})")]
    OptimizerDivergence {
        iteration: usize,
        value: f64,
        start: f64,
    },

    /// Every violated constraint of an experiment configuration.
    #[error("configuration errors:\n  - {}", .0.join("\n  - "))]
    Config(Vec<String>),

    #[error("field file format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("image encoding: {0}")]
    Image(String),
}

impl PatError {
    /// Process exit code used by the command line front-end.
    pub fn exit_code(&self) -> i32 {
        match self {
            PatError::Config(_)
            | PatError::InvalidGrid(_)
            | PatError::InvalidMedium(_)
            | PatError::InvalidSensors(_) => 2,
            PatError::Divergence { .. } | PatError::OptimizerDivergence { .. } => 3,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, PatError>;
