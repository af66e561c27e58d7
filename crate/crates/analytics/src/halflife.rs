use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FitStatus {
    Converged,
    NoDecay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FitMethod {
    LogLinear,
    Nonlinear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfLifeEstimate {
    /// Months; `None` when the series does not decay.
    pub h_hat: Option<f64>,
    pub theta_eff_hat: f64,
    pub alpha0_hat: f64,
    /// In log space for the log-linear fit, in levels for the nonlinear one.
    pub r_squared: f64,
    pub vintage: String,
    pub status: FitStatus,
    pub method: FitMethod,
}

const MIN_LEN: usize = 12;
const THETA_LO: f64 = -0.25;
const THETA_HI: f64 = 1.5;
const GRID: usize = 3500;

fn log_linear(ys: &[f64]) -> (f64, f64, f64) {
    let n = ys.len() as f64;
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = (n - 1.0) / 2.0;
    let my = ly.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (t, y) in ly.iter().enumerate() {
        let dx = t as f64 - mx;
        sxx += dx * dx;
        sxy += dx * (y - my);
        syy += (y - my) * (y - my);
    }
    let b = sxy / sxx;
    let r2 = if syy > 0.0 { (sxy * sxy) / (sxx * syy) } else { 1.0 };
    (-b, (my - b * mx).exp(), r2)
}

/// SSE and the profiled amplitude at rate θ.
fn profile(ys: &[f64], theta: f64) -> (f64, f64) {
    let (mut num, mut den) = (0.0, 0.0);
    for (t, y) in ys.iter().enumerate() {
        let e = (-theta * t as f64).exp();
        num += y * e;
        den += e * e;
    }
    let a = num / den;
    let sse = ys
        .iter()
        .enumerate()
        .map(|(t, y)| (y - a * (-theta * t as f64).exp()).powi(2))
        .sum();
    (sse, a)
}

fn nonlinear(ys: &[f64]) -> (f64, f64, f64) {
    let step = (THETA_HI - THETA_LO) / GRID as f64;
    let mut best = (f64::INFINITY, THETA_LO);
    for k in 0..=GRID {
        let th = THETA_LO + step * k as f64;
        let (sse, _) = profile(ys, th);
        if sse < best.0 {
            best = (sse, th);
        }
    }
    // Golden-section refinement around the best grid point.
    let (mut lo, mut hi) = (best.1 - step, best.1 + step);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let x1 = hi - g * (hi - lo);
        let x2 = lo + g * (hi - lo);
        if profile(ys, x1).0 < profile(ys, x2).0 {
            hi = x2;
        } else {
            lo = x1;
        }
    }
    let th = 0.5 * (lo + hi);
    let (sse, a) = profile(ys, th);
    let n = ys.len() as f64;
    let my = ys.iter().sum::<f64>() / n;
    let sst: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let r2 = if sst > 0.0 { 1.0 - sse / sst } else { 1.0 };
    (th, a, r2)
}

/// Fits α(t) = α(0)e^{−θt} to a monthly series and inverts h = ln2/θ.
/// Uses OLS on log α when every value is positive, otherwise profiled least
/// squares in levels.
pub fn estimate_half_life(alpha_series: &[f64], vintage: &str) -> Result<HalfLifeEstimate> {
    if alpha_series.len() < MIN_LEN {
        return Err(domain(format!("need at least {MIN_LEN} months, got {}", alpha_series.len())));
    }
    if alpha_series.iter().any(|x| !x.is_finite()) {
        return Err(domain("alpha series has non-finite values"));
    }
    if !(alpha_series[0] > 0.0) {
        return Err(domain("initial alpha must be > 0"));
    }
    let (theta, a0, r2, method) = if alpha_series.iter().all(|&x| x > 0.0) {
        let (t, a, r) = log_linear(alpha_series);
        (t, a, r, FitMethod::LogLinear)
    } else {
        let (t, a, r) = nonlinear(alpha_series);
        (t, a, r, FitMethod::Nonlinear)
    };
    let decays = theta > 0.0;
    Ok(HalfLifeEstimate {
        h_hat: decays.then(|| std::f64::consts::LN_2 / theta),
        theta_eff_hat: theta,
        alpha0_hat: a0,
        r_squared: r2,
        vintage: vintage.to_string(),
        status: if decays { FitStatus::Converged } else { FitStatus::NoDecay },
        method,
    })
}
