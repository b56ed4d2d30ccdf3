use thiserror::Error;

pub type Result<T> = std::result::Result<T, NsoError>;

#[derive(Debug, Error)]
pub enum NsoError {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("matrix is not positive definite (failing pivot {pivot})")]
    Decomposition { pivot: usize },

    #[error("integration failed at t = {time}: {reason}")]
    Integration { time: f64, reason: String },

    #[error("simulation diverged in row {row} at time index {time_index}")]
    Simulation { row: usize, time_index: usize },

    #[error("gradient check failed: {0}")]
    GradCheck(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unknown {kind} '{name}'")]
    Lookup { kind: &'static str, name: String },

    #[error("every library column was thresholded away for state equation {state}")]
    EmptyModel { state: usize },

    #[error("training diverged at epoch {epoch}, batch {batch}")]
    Training { epoch: usize, batch: usize },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
