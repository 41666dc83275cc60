use thiserror::Error;

pub type Result<T> = std::result::Result<T, ExperimentError>;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("training diverged at step {step}: non-finite gradient")]
    Diverged { step: usize },
    #[error("draw {draw}, mask {mask}: training diverged at step {step}")]
    Training { draw: usize, mask: usize, step: usize },
    #[error(transparent)]
    Core(#[from] fgen_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
