use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnalyticsError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid panel: {0}")]
    InvalidPanel(String),
    #[error("calibration failed: {0}")]
    Calibration(String),
    #[error("rank-deficient input: {0}")]
    RankDeficient(String),
    #[error("cache format: {0}")]
    Format(String),
    #[error(transparent)]
    Model(#[from] model_core::ModelError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, AnalyticsError>;

pub(crate) fn domain(msg: impl Into<String>) -> AnalyticsError {
    AnalyticsError::Domain(msg.into())
}
