use thiserror::Error;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error(transparent)]
    Model(#[from] model_core::ModelError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, DynamicsError>;
