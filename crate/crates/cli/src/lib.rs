//! Scenario configuration, output layout and subcommand drivers.

pub mod commands;
pub mod config;
pub mod output;

pub use commands::Command;
pub use config::{ConfigError, ScenarioConfig};
