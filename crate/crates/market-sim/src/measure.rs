use serde::{Deserialize, Serialize};

use crate::agents::{AgentKind, AgentSpec};
use crate::error::{MarketError, Result};
use crate::sim::MarketPath;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaReport {
    pub agent: usize,
    pub per_signal: Vec<f64>,
    pub total: f64,
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, v)
}

/// Mean of (v_{t+1} − p_t)·q minus τ/2 times its per-period sample variance,
/// per signal; `total` is the sum over signals.
pub fn measure_alpha(path: &MarketPath, agent: &AgentSpec, tau_risk: f64) -> Result<AlphaReport> {
    let t_len = path.ticks.len();
    if t_len < 3 {
        return Err(MarketError::Domain(format!("path of {t_len} ticks is too short for alpha")));
    }
    let k_sig = path.k_signals();
    let mut per_signal = Vec::with_capacity(k_sig);
    let mut prod = vec![0.0; t_len - 1];
    for k in 0..k_sig {
        for (t, x) in prod.iter_mut().enumerate() {
            *x = (path.ticks[t + 1].v - path.ticks[t].p) * path.position(agent.id, t, k)?;
        }
        let (m, v) = mean_var(&prod);
        per_signal.push(m - 0.5 * tau_risk * v);
    }
    Ok(AlphaReport {
        agent: agent.id,
        total: per_signal.iter().sum(),
        per_signal,
    })
}

/// Sum of total alphas over every tracked AI agent.
pub fn aggregate_alpha(path: &MarketPath, tau_risk: f64) -> Result<f64> {
    let mut acc = 0.0;
    for &i in &path.tracked {
        let ag = &path.agents[i];
        if ag.kind == AgentKind::Ai {
            acc += measure_alpha(path, ag, tau_risk)?.total;
        }
    }
    Ok(acc)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrainingReport {
    pub signal_index: usize,
    pub beta_hat: f64,
    pub std_error: f64,
    /// β̂/β^CF; `None` for a null signal.
    pub omega_implied: Option<f64>,
    pub sample_size: usize,
}

/// OLS of the post-arbitrage return on f_k(t) over the last `window` ticks.
pub fn retrain_regression(path: &MarketPath, signal_index: usize, window: usize) -> Result<RetrainingReport> {
    if window < 30 {
        return Err(MarketError::Domain("window must be >= 30".into()));
    }
    if signal_index >= path.k_signals() {
        return Err(MarketError::Domain(format!("no signal {signal_index}")));
    }
    if path.ticks.len() < window {
        return Err(MarketError::Domain(format!("path has {} ticks, window {window}", path.ticks.len())));
    }
    let rows = &path.ticks[path.ticks.len() - window..];
    let n = window as f64;
    let mx = rows.iter().map(|r| r.per_signal_f[signal_index]).sum::<f64>() / n;
    let my = rows.iter().map(|r| r.r_obs[signal_index]).sum::<f64>() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for r in rows {
        let dx = r.per_signal_f[signal_index] - mx;
        sxx += dx * dx;
        sxy += dx * (r.r_obs[signal_index] - my);
    }
    if !(sxx > 1e-300) {
        return Err(MarketError::Degenerate(format!("signal {signal_index} has no variation in window")));
    }
    let beta_hat = sxy / sxx;
    let alpha_hat = my - beta_hat * mx;
    let sse: f64 = rows
        .iter()
        .map(|r| {
            let e = r.r_obs[signal_index] - alpha_hat - beta_hat * r.per_signal_f[signal_index];
            e * e
        })
        .sum();
    let std_error = (sse / (n - 2.0) / sxx).sqrt();
    let bcf = path.params.signals[signal_index].beta_cf;
    Ok(RetrainingReport {
        signal_index,
        beta_hat,
        std_error,
        omega_implied: if bcf > 0.0 { Some(beta_hat / bcf) } else { None },
        sample_size: window,
    })
}
