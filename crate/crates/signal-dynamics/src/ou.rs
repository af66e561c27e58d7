use model_core::seed::{stream, stream_rng};
use model_core::SignalSpec;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{DynamicsError, Result};

/// Exact-transition OU path `df = -θ f dt + σ dW`, started from stationarity.
///
/// Returns `floor(horizon/dt) + 1` points including f(0).
pub fn simulate_ou(spec: &SignalSpec, horizon: f64, dt: f64, seed: u64) -> Result<Vec<f64>> {
    simulate(spec, None, horizon, dt, seed)
}

/// Same transition as [`simulate_ou`] but from a fixed starting level.
pub fn simulate_ou_from(spec: &SignalSpec, f0: f64, horizon: f64, dt: f64, seed: u64) -> Result<Vec<f64>> {
    simulate(spec, Some(f0), horizon, dt, seed)
}

fn simulate(spec: &SignalSpec, f0: Option<f64>, horizon: f64, dt: f64, seed: u64) -> Result<Vec<f64>> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(DynamicsError::Domain(format!("dt must be > 0, got {dt}")));
    }
    if !(horizon >= dt) {
        return Err(DynamicsError::Domain(format!("horizon {horizon} shorter than dt {dt}")));
    }
    if !(spec.theta > 0.0 && spec.sigma0_sq >= 0.0) {
        return Err(DynamicsError::Domain("theta must be > 0 and sigma0_sq >= 0".into()));
    }
    let steps = (horizon / dt + 1e-9).floor() as usize;
    let mut rng = stream_rng(seed, stream::OU, 0);
    let th = spec.theta;
    let decay = (-th * dt).exp();
    let step_sd = (spec.sigma0_sq * (1.0 - decay * decay) / (2.0 * th)).sqrt();
    let mut f = match f0 {
        Some(x) => x,
        None => (spec.sigma0_sq / (2.0 * th)).sqrt() * rng.sample::<f64, _>(StandardNormal),
    };
    let mut path = Vec::with_capacity(steps + 1);
    path.push(f);
    for _ in 0..steps {
        f = f * decay + step_sd * rng.sample::<f64, _>(StandardNormal);
        path.push(f);
    }
    Ok(path)
}
