use thiserror::Error;

/// Errors produced by the optimization engine and its components.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid run configuration, parameter definition, or registry id.
    #[error("configuration error: {0}")]
    Config(String),

    /// A fitness evaluation could not produce a usable result.
    #[error("evaluation failed: {0}")]
    Evaluation(String),

    /// An optimizer update step could not be applied; state is unchanged.
    #[error("optimizer step error: {0}")]
    Step(String),

    /// The trajectory holds no successful entry to report.
    #[error("trajectory has no successful entries")]
    EmptyTrajectory,

    /// A checkpoint was missing or unreadable when resuming.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn evaluation(msg: impl Into<String>) -> Self {
        Error::Evaluation(msg.into())
    }

    pub fn step(msg: impl Into<String>) -> Self {
        Error::Step(msg.into())
    }
}
