//! Signal paths, performative erosion and the extinction cascade.
//!
//! One retraining epoch is one month.
mod cascade;
mod erosion;
mod error;
mod ou;

pub use cascade::{
    cascade_simulate, cascade_simulate_schedule, heterogeneous_fixture, write_events_csv, CascadeConfig,
    CascadeEvent, EpochRecord, ErosionTrace, PhiSchedule, FIXTURE_EPOCHS,
};
pub use erosion::{
    erosion_step, extinction_threshold, steady_state_variance, trading_intensity, vulnerability_index,
    ErosionOutcome, SignalState, SignalStatus, Threshold,
};
pub use error::{DynamicsError, Result};
pub use ou::{simulate_ou, simulate_ou_from};
