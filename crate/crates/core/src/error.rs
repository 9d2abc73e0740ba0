use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("resolution mismatch: reward grid {reward} vs kernel {kernel}")]
    MismatchedResolution { reward: f64, kernel: f64 },

    #[error("invalid observation: {0}")]
    InvalidObservation(String),

    #[error("degenerate filter: {0}")]
    DegenerateFilter(String),

    #[error("insufficient data for {subject}: {count} usable rows, need at least {required}")]
    InsufficientData {
        subject: String,
        count: usize,
        required: usize,
    },

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by numerical collapse rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::DegenerateFilter(_) | Error::InvalidObservation(_))
    }
}
