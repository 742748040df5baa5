use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid decomposition: {0}")]
    InvalidDecomposition(String),

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("empty region")]
    EmptyRegion,

    #[error("index {index} outside field of length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("singular system: zero pivot at row {row}")]
    SingularSystem { row: usize },

    #[error("series did not converge within {terms} terms (partial value {partial})")]
    SeriesNotConverged { partial: f64, terms: usize },

    #[error("training diverged after {} epochs", loss_history.len())]
    Diverged { loss_history: Vec<f64> },

    #[error("sub-iteration did not converge at time step {step}")]
    SubIterationFailed { step: usize },

    #[error("invalid training data: {0}")]
    InvalidData(String),

    #[error("table: {0}")]
    Table(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
