use thiserror::Error;

#[derive(Debug, Error)]
pub enum GameError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("only {got} samples in the 1% tail, need {need}; raise replications")]
    ThinTail { got: usize, need: usize },
    #[error(transparent)]
    Model(#[from] model_core::ModelError),
    #[error(transparent)]
    Market(#[from] market_sim::MarketError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, GameError>;
