//! Parameters and closed-form quantities of the alpha-decay model.
//!
//! Rates are per month and half-lives are in months throughout.

pub mod closed;
mod error;
pub mod params;
pub mod seed;

pub use closed::*;
pub use error::{ModelError, Result};
pub use params::*;
