use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An operation needs a nonempty or full-dimensional body.
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("infeasible surface area measure: {0}")]
    InfeasibleMeasure(String),

    #[error("body leaves the unit box by {excess:e}")]
    BodyOutOfBox { excess: f64 },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("directions {0} and {1} are parallel")]
    ParallelDirections(usize, usize),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("reconstruction failed in stage {stage}: {reason}")]
    ReconstructionFailure { stage: String, reason: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Configuration(msg.into())
    }

    pub fn failure(stage: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::ReconstructionFailure {
            stage: stage.into(),
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
