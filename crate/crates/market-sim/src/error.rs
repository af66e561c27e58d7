use thiserror::Error;

#[derive(Debug, Error)]
pub enum MarketError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("degenerate regression: {0}")]
    Degenerate(String),
    #[error("agent {0} was not tracked in this run")]
    Untracked(usize),
    #[error(transparent)]
    Model(#[from] model_core::ModelError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, MarketError>;
