use model_core::{ModelParams, SignalSpec};
use serde::{Deserialize, Serialize};

use crate::error::{DynamicsError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum SignalStatus {
    Regenerating,
    Compressing,
    Extinct,
}

impl SignalStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SignalStatus::Regenerating => "REGENERATING",
            SignalStatus::Compressing => "COMPRESSING",
            SignalStatus::Extinct => "EXTINCT",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalState {
    pub spec: SignalSpec,
    pub sigma_sq: f64,
    pub f: f64,
    pub status: SignalStatus,
    pub epoch: usize,
}

impl SignalState {
    pub fn new(spec: SignalSpec, f: f64) -> Self {
        SignalState {
            sigma_sq: spec.sigma0_sq,
            spec,
            f,
            status: SignalStatus::Regenerating,
            epoch: 0,
        }
    }
}

/// I_k = N·φ·|a_k f_k|·ρ_k.
pub fn trading_intensity(state: &SignalState, phi: f64, n: f64) -> f64 {
    n * phi * (state.spec.a * state.f).abs() * state.spec.rho
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErosionOutcome {
    pub sigma_sq: f64,
    /// Multiplicative factor 1 + g − β(I/I_max)^κ before flooring.
    pub factor: f64,
    /// The unfloored result was negative.
    pub clamped: bool,
}

/// σ²(τ+1) = σ²(τ)·[1 + g − β(I/I_max)^κ], floored at zero.
pub fn erosion_step(state: &SignalState, intensity: f64, beta: f64, kappa: f64, i_max: f64) -> Result<ErosionOutcome> {
    if !(i_max > 0.0) {
        return Err(DynamicsError::Domain("i_max must be > 0".into()));
    }
    if !(0.0..1.0).contains(&beta) {
        return Err(DynamicsError::Domain(format!("beta={beta} outside [0,1)")));
    }
    if !(kappa >= 1.0) {
        return Err(DynamicsError::Domain(format!("kappa={kappa} must be >= 1")));
    }
    if !(intensity >= 0.0) {
        return Err(DynamicsError::Domain(format!("intensity must be >= 0, got {intensity}")));
    }
    let factor = 1.0 + state.spec.g - beta * (intensity / i_max).powf(kappa);
    let raw = state.sigma_sq * factor;
    Ok(ErosionOutcome {
        sigma_sq: raw.max(0.0),
        factor,
        clamped: raw < 0.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    At(f64),
    NeverExtinct,
}

impl Threshold {
    pub fn value(self) -> f64 {
        match self {
            Threshold::At(x) => x,
            Threshold::NeverExtinct => f64::INFINITY,
        }
    }
}

/// φ_k* = I_max·√(πθ_k)/(N ρ_k a_k σ_k(0)) · (g_k/β)^(1/κ).
pub fn extinction_threshold(spec: &SignalSpec, params: &ModelParams, beta: f64) -> Result<Threshold> {
    if spec.rho <= 0.0 || spec.a <= 0.0 {
        return Ok(Threshold::NeverExtinct);
    }
    if !(beta > 0.0) {
        return Err(DynamicsError::Domain("beta must be > 0".into()));
    }
    let scale = params.i_max * (std::f64::consts::PI * spec.theta).sqrt()
        / (params.n() * spec.rho * spec.a * spec.sigma0());
    Ok(Threshold::At(scale * (spec.g / beta).powf(1.0 / params.kappa)))
}

/// σ*² = σ²(0) below the threshold, σ²(0)(φ*/φ)² above it.
pub fn steady_state_variance(spec: &SignalSpec, phi: f64, phi_star: f64) -> Result<f64> {
    if !(phi_star > 0.0) {
        return Err(DynamicsError::Domain("phi_star must be > 0".into()));
    }
    if phi <= phi_star {
        Ok(spec.sigma0_sq)
    } else {
        Ok(spec.sigma0_sq * (phi_star / phi).powi(2))
    }
}

/// ρ_k a_k / g_k^(1/κ); +∞ when g_k = 0.
pub fn vulnerability_index(spec: &SignalSpec, kappa: f64) -> f64 {
    if spec.g <= 0.0 {
        return f64::INFINITY;
    }
    spec.rho * spec.a / spec.g.powf(1.0 / kappa)
}
