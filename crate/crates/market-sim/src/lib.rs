//! Agent-based market with AI and human informed traders, a Kyle market
//! maker, retraining regressions and flash-crash stress runs.
//!
//! One tick is one trading day; monthly rates are divided by
//! [`TICKS_PER_MONTH`].
mod agents;
mod crash;
mod error;
mod measure;
mod sim;

pub use agents::{agent_demand, generate_signals, AgentKind, AgentSpec, Observations};
pub use crash::{flash_crash, flash_crash_batch, flash_crash_with, CrashBatch, CrashConfig, CrashScenario};
pub use error::{MarketError, Result};
pub use measure::{aggregate_alpha, measure_alpha, retrain_regression, AlphaReport, RetrainingReport};
pub use model_core::ModelParams;
pub use sim::{
    price_update, run_market, run_market_agents, run_market_with, signal_return_series, MarketConfig, MarketPath,
    StressEvent, TickRecord, Tracking,
};

pub const TICKS_PER_MONTH: f64 = 21.0;

/// Rescale every a_k so the baseline decay target holds at the current φ.
pub fn calibrate_aggressiveness(params: &mut ModelParams, target_delta: f64) -> Result<()> {
    Ok(params.calibrate_aggressiveness(target_delta)?)
}
