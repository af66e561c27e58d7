//! Closed forms of Layers 1-3. Everything here is a pure function.

use crate::error::{domain, finite, ModelError, Result};
use crate::params::{LambdaRegime, MarketParams, ModelParams, SignalSpec};

/// Kyle price impact under the configured regime.
pub fn kyle_lambda(market: &MarketParams, phi: f64, rho_bar: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&phi) || !(0.0..=1.0).contains(&rho_bar) {
        return Err(domain(format!("phi={phi}, rho_bar={rho_bar} must lie in [0,1]")));
    }
    let lam = match market.lambda_regime {
        LambdaRegime::Decreasing => {
            let r = phi * rho_bar * market.sigma_eta / market.sigma_v;
            market.sigma_v / (2.0 * market.sigma_u) / (1.0 + r * r).sqrt()
        }
        LambdaRegime::Constant => market.lambda0,
        LambdaRegime::Increasing => market.lambda0 * (1.0 + market.lambda_slope * phi),
    };
    let lam = finite("lambda", lam)?;
    if lam <= 0.0 {
        return Err(domain(format!("non-positive lambda {lam}")));
    }
    Ok(lam)
}

/// dλ/dφ of the configured regime.
pub fn kyle_lambda_slope(market: &MarketParams, phi: f64, rho_bar: f64) -> Result<f64> {
    let lam = kyle_lambda(market, phi, rho_bar)?;
    Ok(match market.lambda_regime {
        LambdaRegime::Decreasing => {
            let c = (rho_bar * market.sigma_eta / market.sigma_v).powi(2);
            -lam * phi * c / (1.0 + c * phi * phi)
        }
        LambdaRegime::Constant => 0.0,
        LambdaRegime::Increasing => market.lambda0 * market.lambda_slope,
    })
}

/// Sufficient condition for δ to increase in φ: dλ/dφ < λ/φ.
pub fn delta_increasing_condition(market: &MarketParams, phi: f64, rho_bar: f64) -> Result<bool> {
    if phi == 0.0 {
        return Ok(true);
    }
    let lam = kyle_lambda(market, phi, rho_bar)?;
    Ok(kyle_lambda_slope(market, phi, rho_bar)? < lam / phi)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decay {
    pub theta_eff: f64,
    pub delta: f64,
}

pub fn effective_decay(sig: &SignalSpec, phi: f64, n: f64, lam: f64) -> Result<Decay> {
    if !(lam > 0.0) {
        return Err(domain(format!("lambda must be > 0, got {lam}")));
    }
    let delta = n * phi * sig.a * sig.rho / lam;
    Ok(Decay {
        theta_eff: finite("theta_eff", sig.theta + delta)?,
        delta,
    })
}

/// Decay of signal `k` at adoption `phi`, with λ from the market regime.
pub fn decay_at(params: &ModelParams, k: usize, phi: f64) -> Result<Decay> {
    let lam = kyle_lambda(&params.market, phi, params.rho_bar())?;
    effective_decay(&params.signals[k], phi, params.n(), lam)
}

pub fn half_life(theta_eff: f64) -> Result<f64> {
    if !(theta_eff > 0.0) {
        return Err(domain(format!("theta_eff must be > 0, got {theta_eff}")));
    }
    Ok(std::f64::consts::LN_2 / theta_eff)
}

pub fn stationary_alpha(sig: &SignalSpec, theta_eff: f64) -> Result<f64> {
    if !(theta_eff > 0.0) {
        return Err(domain(format!("theta_eff must be > 0, got {theta_eff}")));
    }
    Ok(sig.sigma0_sq / (2.0 * theta_eff))
}

/// Cross-sectional dispersion of AI fund alphas.
pub fn cross_sectional_dispersion(params: &ModelParams, phi: f64) -> Result<f64> {
    let lam = kyle_lambda(&params.market, phi, params.rho_bar())?;
    let snu2 = params.market.sigma_nu * params.market.sigma_nu;
    let mut acc = 0.0;
    for s in &params.signals {
        let d = effective_decay(s, phi, params.n(), lam)?;
        acc += (1.0 - s.rho * s.rho) * snu2 * s.a * s.a / (d.theta_eff * d.theta_eff);
    }
    Ok(acc.sqrt())
}

/// ω = θ/(θ+δ).
pub fn attenuation_factor(theta: f64, delta: f64) -> Result<f64> {
    if !(theta > 0.0) {
        return Err(domain(format!("theta must be > 0, got {theta}")));
    }
    if !(delta >= 0.0) {
        return Err(domain(format!("delta must be >= 0, got {delta}")));
    }
    Ok(theta / (theta + delta))
}

/// β = 2ω(1−ω).
pub fn performative_beta(omega: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&omega) {
        return Err(domain(format!("omega={omega} outside [0,1]")));
    }
    Ok(2.0 * omega * (1.0 - omega))
}

/// Predictable return variance as seen by a retrained model.
pub fn perceived_variance(sig: &SignalSpec, phi: f64, n: f64, lam: f64) -> Result<f64> {
    let d = effective_decay(sig, phi, n, lam)?;
    let omega = attenuation_factor(sig.theta, d.delta)?;
    Ok(omega * omega * sig.beta_cf * sig.beta_cf * sig.sigma0_sq / (2.0 * d.theta_eff))
}

/// M = (1 − φρ̄β/λ′)⁻¹.
pub fn reflexive_multiplier(phi: f64, rho_bar: f64, beta: f64, lambda_prime: f64) -> Result<f64> {
    if !(lambda_prime > 0.0) {
        return Err(domain("lambda_prime must be > 0"));
    }
    let gain = phi * rho_bar * beta / lambda_prime;
    if !(gain < 1.0) {
        return Err(ModelError::Instability { gain });
    }
    Ok(1.0 / (1.0 - gain))
}

/// λ′ that makes M(φ, ρ̄, β) hit `target`.
pub fn lambda_prime_for_multiplier(phi: f64, rho_bar: f64, beta: f64, target: f64) -> Result<f64> {
    if !(target > 1.0) {
        return Err(domain("target multiplier must exceed 1"));
    }
    Ok(phi * rho_bar * beta / (1.0 - 1.0 / target))
}

/// M(1) − M(φ) with a caller-supplied λ′(φ).
pub fn diversity_premium<F: Fn(f64) -> f64>(phi: f64, rho_bar: f64, beta: f64, lambda_prime_fn: F) -> Result<f64> {
    let m1 = reflexive_multiplier(1.0, rho_bar, beta, lambda_prime_fn(1.0))?;
    let m = reflexive_multiplier(phi, rho_bar, beta, lambda_prime_fn(phi))?;
    Ok(m1 - m)
}

pub fn pigouvian_tax(rho_flow: f64, zeta: f64, threshold: f64) -> f64 {
    zeta * (rho_flow - threshold).max(0.0)
}

/// δ implied by a half-life shortening from `h0` to `h`.
pub fn calibration_delta(h0: f64, h: f64, theta: f64) -> Result<f64> {
    if !(h0 > 0.0 && h > 0.0) {
        return Err(domain(format!("half-lives must be > 0 (h0={h0}, h={h})")));
    }
    if !(theta > 0.0) {
        return Err(domain("theta must be > 0"));
    }
    Ok(theta * (h0 / h - 1.0))
}

/// a such that Nφρa/λ = δ.
pub fn aggressiveness_for_delta(delta: f64, phi: f64, n: f64, rho: f64, lam: f64) -> Result<f64> {
    let denom = n * phi * rho;
    if !(denom > 0.0) {
        return Err(domain("calibration needs phi > 0 and rho > 0"));
    }
    if !(delta > 0.0) {
        return Err(domain("target delta must be > 0"));
    }
    Ok(delta * lam / denom)
}
