use model_core::seed::{derive_seed, stream};
use model_core::ModelParams;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{MarketError, Result};
use crate::sim::{run_market_with, MarketConfig, StressEvent, Tracking};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CrashConfig {
    pub shock: f64,
    pub calm_rho: f64,
    pub stress_rho: f64,
    pub shock_tick: usize,
    /// Ticks observed after the shock.
    pub window: usize,
    /// Ticks before the shock averaged into the reference price.
    pub pre_window: usize,
    pub feedback_beta: f64,
    pub market: MarketConfig,
}

impl Default for CrashConfig {
    fn default() -> Self {
        CrashConfig {
            shock: 0.035,
            calm_rho: 0.45,
            stress_rho: 0.85,
            shock_tick: 300,
            window: 40,
            pre_window: 5,
            feedback_beta: 0.2,
            market: MarketConfig {
                jump_rate: 0.0,
                ..MarketConfig::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrashScenario {
    pub shock_size: f64,
    pub calm_rho: f64,
    pub stress_rho: f64,
    pub observed_decline: f64,
    pub fundamental_decline: f64,
    /// observed/fundamental; +∞ when the feedback loop gain reaches 1.
    pub m_hat: f64,
    pub unstable: bool,
}

fn peak_decline(prices: &[f64], t0: usize, pre: usize) -> f64 {
    let reference = prices[t0 - pre..t0].iter().sum::<f64>() / pre as f64;
    let low = prices[t0..].iter().copied().fold(f64::INFINITY, f64::min);
    (reference - low) / reference
}

/// Paired runs from one seed: the observed market switches to `stress_rho` at
/// the shock and carries risk-management feedback; the fundamental run keeps
/// `calm_rho` and has no feedback.
pub fn flash_crash(params: &ModelParams, shock: f64, calm_rho: f64, stress_rho: f64, seed: u64) -> Result<CrashScenario> {
    let cfg = CrashConfig {
        shock,
        calm_rho,
        stress_rho,
        ..CrashConfig::default()
    };
    flash_crash_with(params, &cfg, seed)
}

pub fn flash_crash_with(params: &ModelParams, cfg: &CrashConfig, seed: u64) -> Result<CrashScenario> {
    if !(0.0 <= cfg.calm_rho && cfg.calm_rho <= cfg.stress_rho && cfg.stress_rho <= 1.0) {
        return Err(MarketError::Domain("need 0 <= calm_rho <= stress_rho <= 1".into()));
    }
    if !(cfg.shock > 0.0 && cfg.shock < 1.0) {
        return Err(MarketError::Domain("shock must lie in (0,1)".into()));
    }
    if cfg.pre_window < 1 || cfg.shock_tick < cfg.pre_window || cfg.window < 1 {
        return Err(MarketError::Domain("inconsistent crash windows".into()));
    }
    let mut p = params.clone();
    for s in &mut p.signals {
        s.rho = cfg.calm_rho;
    }
    let gain = p.phi * cfg.stress_rho * cfg.feedback_beta / p.market.lambda_prime;
    let horizon = cfg.shock_tick + cfg.window;
    let base = MarketConfig {
        tracking: Tracking::None,
        ..cfg.market.clone()
    };
    let fundamental_cfg = MarketConfig {
        feedback: false,
        stress: Some(StressEvent {
            tick: cfg.shock_tick,
            shock: cfg.shock,
            stress_rho: None,
        }),
        ..base.clone()
    };
    let fundamental = run_market_with(&p, &fundamental_cfg, horizon, seed)?;
    let prices: Vec<f64> = fundamental.ticks.iter().map(|t| t.p).collect();
    let fundamental_decline = peak_decline(&prices, cfg.shock_tick, cfg.pre_window);

    if gain >= 1.0 {
        return Ok(CrashScenario {
            shock_size: cfg.shock,
            calm_rho: cfg.calm_rho,
            stress_rho: cfg.stress_rho,
            observed_decline: f64::INFINITY,
            fundamental_decline,
            m_hat: f64::INFINITY,
            unstable: true,
        });
    }

    let observed_cfg = MarketConfig {
        feedback: true,
        feedback_beta: Some(cfg.feedback_beta),
        stress: Some(StressEvent {
            tick: cfg.shock_tick,
            shock: cfg.shock,
            stress_rho: Some(cfg.stress_rho),
        }),
        ..base
    };
    let observed = run_market_with(&p, &observed_cfg, horizon, seed)?;
    let prices: Vec<f64> = observed.ticks.iter().map(|t| t.p).collect();
    let observed_decline = peak_decline(&prices, cfg.shock_tick, cfg.pre_window);
    let m_hat = if fundamental_decline > 0.0 {
        observed_decline / fundamental_decline
    } else {
        f64::NAN
    };
    Ok(CrashScenario {
        shock_size: cfg.shock,
        calm_rho: cfg.calm_rho,
        stress_rho: cfg.stress_rho,
        observed_decline,
        fundamental_decline,
        m_hat,
        unstable: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrashBatch {
    pub scenarios: Vec<CrashScenario>,
    pub mean_m_hat: f64,
    pub sd_m_hat: f64,
    pub mean_observed: f64,
    pub mean_fundamental: f64,
}

/// `runs` independent crash pairs; seeds derive from `master` by index.
pub fn flash_crash_batch(params: &ModelParams, cfg: &CrashConfig, runs: usize, master: u64) -> Result<CrashBatch> {
    if runs < 1 {
        return Err(MarketError::Domain("runs must be >= 1".into()));
    }
    let scenarios = (0..runs)
        .into_par_iter()
        .map(|i| flash_crash_with(params, cfg, derive_seed(master, stream::CRASH, i as u64)))
        .collect::<Result<Vec<_>>>()?;
    let n = runs as f64;
    let mean = |f: &dyn Fn(&CrashScenario) -> f64| scenarios.iter().map(f).sum::<f64>() / n;
    let mean_m_hat = mean(&|s| s.m_hat);
    let sd_m_hat = if runs > 1 {
        (scenarios.iter().map(|s| (s.m_hat - mean_m_hat).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(CrashBatch {
        mean_observed: mean(&|s| s.observed_decline),
        mean_fundamental: mean(&|s| s.fundamental_decline),
        mean_m_hat,
        sd_m_hat,
        scenarios,
    })
}
