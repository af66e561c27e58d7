use model_core::{decay_at, stationary_alpha, ModelParams};

use crate::error::Result;

/// A*_k(φ) shared among the adopters that compete for the correlated component.
///
/// The effective number of competitors is 1 + ρ_k²(Nφ − 1), floored at 1:
/// idiosyncratic observation noise does not crowd the same trade.
pub fn ai_alpha_per_capita(params: &ModelParams, k: usize, phi: f64) -> Result<f64> {
    let d = decay_at(params, k, phi)?;
    let sig = &params.signals[k];
    let total = stationary_alpha(sig, d.theta_eff)?;
    let n_eff = (1.0 + sig.rho * sig.rho * (params.n() * phi - 1.0)).max(1.0);
    Ok(total / n_eff)
}

/// α^H_k(φ) = α₀·θ_k/θ_eff,k, with α₀ = r σ_k²/(2θ_k) unless overridden.
pub fn human_alpha(params: &ModelParams, k: usize, phi: f64) -> Result<f64> {
    let m = &params.market;
    let ratio = (m.sigma_eta * m.sigma_eta / (m.sigma_h * m.sigma_h)).min(1.0);
    let sig = &params.signals[k];
    let a0 = params.alpha_h0.unwrap_or(ratio * sig.sigma0_sq / (2.0 * sig.theta));
    let d = decay_at(params, k, phi)?;
    Ok(a0 * sig.theta / d.theta_eff)
}

/// Σ_k [α_k(φ) − α^H_k(φ)] per institution.
pub fn alpha_advantage(phi: f64, params: &ModelParams) -> Result<f64> {
    let mut acc = 0.0;
    for k in 0..params.k_signals() {
        acc += ai_alpha_per_capita(params, k, phi)? - human_alpha(params, k, phi)?;
    }
    Ok(acc)
}

/// ΔΠ = advantage − c + γ(φ − d).
pub fn adoption_incentive(phi: f64, cost: f64, params: &ModelParams) -> Result<f64> {
    Ok(alpha_advantage(phi, params)? - cost + params.gamma * (phi - params.d_bench))
}

/// G(advantage + γ(φ − d)): mass of institutions whose cost is covered.
pub fn best_response_share(phi: f64, params: &ModelParams) -> Result<f64> {
    let threshold = alpha_advantage(phi, params)? + params.gamma * (phi - params.d_bench);
    Ok(params.cost_dist.cdf(threshold))
}
