use thiserror::Error;

pub type Result<T> = std::result::Result<T, MocuError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MocuError {
    #[error("invalid grid: n_theta={n_theta}, n_psi={n_psi}")]
    InvalidGrid { n_theta: usize, n_psi: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("index out of bounds: {what} = {index} (valid 1..={max})")]
    OutOfBounds {
        what: &'static str,
        index: usize,
        max: usize,
    },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid experiment model: {0}")]
    InvalidExperimentModel(String),

    #[error("outcome {y} of experiment {x} has zero evidence under the current distribution")]
    ImpossibleOutcome { x: usize, y: usize },

    #[error("kernel matrix is singular after jitter escalation to {jitter:e}")]
    SingularKernel { jitter: f64 },

    #[error("training set too small: need at least {needed} points, have {have}")]
    InsufficientTraining { needed: usize, have: usize },

    #[error("singular state-space system at omega = {omega}")]
    SingularSystem { omega: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for MocuError {
    fn from(e: std::io::Error) -> Self {
        MocuError::Io(e.to_string())
    }
}

impl From<csv::Error> for MocuError {
    fn from(e: csv::Error) -> Self {
        MocuError::Io(e.to_string())
    }
}
