use std::collections::VecDeque;
use std::io::Write;

use model_core::seed::{derive_seed, rng_from, stream};
use model_core::{kyle_lambda, ModelParams};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agents::{agent_demand, generate_signals, AgentKind, AgentSpec, Observations};
use crate::error::{MarketError, Result};

/// Which agents get their per-tick positions stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tracking {
    None,
    All,
    Agents(Vec<usize>),
}

/// One-off fundamental shock with an optional homogeneity switch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StressEvent {
    pub tick: usize,
    /// Fractional drop of v̄ applied at `tick`.
    pub shock: f64,
    /// ρ_k for every signal from `tick` on; `None` keeps the configured values.
    pub stress_rho: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MarketConfig {
    pub vbar: f64,
    /// Weight on the market maker's EWMA estimate of Σf.
    pub xi: f64,
    pub ewma_span: f64,
    /// Risk-management feedback on p_{t−1} − p_{t−1−w}.
    pub feedback: bool,
    pub feedback_window: usize,
    /// Feedback intensity; `None` uses `ModelParams::beta`.
    pub feedback_beta: Option<f64>,
    /// Per-tick probability of a public jump in v̄.
    pub jump_rate: f64,
    pub jump_sd: f64,
    pub ticks_per_month: f64,
    /// Starting f_k; `None` draws from the stationary law.
    pub initial_f: Option<Vec<f64>>,
    pub stress: Option<StressEvent>,
    pub tracking: Tracking,
}

impl Default for MarketConfig {
    fn default() -> Self {
        MarketConfig {
            vbar: 3000.0,
            xi: 0.5,
            ewma_span: 20.0,
            feedback: true,
            feedback_window: 5,
            feedback_beta: None,
            jump_rate: 0.002,
            jump_sd: 40.0,
            ticks_per_month: crate::TICKS_PER_MONTH,
            initial_f: None,
            stress: None,
            tracking: Tracking::None,
        }
    }
}

impl MarketConfig {
    pub fn validate(&self, k_signals: usize) -> Result<()> {
        let ok = self.vbar.is_finite()
            && (0.0..=1.0).contains(&self.xi)
            && self.ewma_span >= 1.0
            && self.feedback_window >= 1
            && (0.0..=1.0).contains(&self.jump_rate)
            && self.jump_sd >= 0.0
            && self.ticks_per_month > 0.0
            && self.feedback_beta.is_none_or(|b| (0.0..1.0).contains(&b));
        if !ok {
            return Err(MarketError::Domain(format!("invalid market config: {self:?}")));
        }
        if let Some(f0) = &self.initial_f {
            if f0.len() != k_signals {
                return Err(MarketError::Domain("initial_f needs one value per signal".into()));
            }
        }
        if let Some(s) = &self.stress {
            if !(0.0..1.0).contains(&s.shock) || s.stress_rho.is_some_and(|r| !(0.0..=1.0).contains(&r)) {
                return Err(MarketError::Domain(format!("invalid stress event: {s:?}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub t: usize,
    pub v: f64,
    pub vbar: f64,
    pub p: f64,
    pub order_flow: f64,
    pub noise_flow: f64,
    pub feedback_flow: f64,
    pub per_signal_f: Vec<f64>,
    /// Post-arbitrage return realized over (t, t+1) attributed to signal k.
    pub r_obs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketPath {
    pub ticks: Vec<TickRecord>,
    pub agents: Vec<AgentSpec>,
    pub tracked: Vec<usize>,
    /// Per tracked agent, `T × K` signal positions, tick-major.
    pub positions: Vec<Vec<f64>>,
    /// Per tracked agent, feedback component of demand per tick.
    pub feedback_positions: Vec<Vec<f64>>,
    pub params: ModelParams,
    pub config: MarketConfig,
    pub seed: u64,
}

impl MarketPath {
    pub fn k_signals(&self) -> usize {
        self.params.k_signals()
    }

    fn slot(&self, agent: usize) -> Result<usize> {
        self.tracked
            .iter()
            .position(|&a| a == agent)
            .ok_or(MarketError::Untracked(agent))
    }

    /// q_{i,k}(t) for a tracked agent.
    pub fn position(&self, agent: usize, t: usize, k: usize) -> Result<f64> {
        let s = self.slot(agent)?;
        Ok(self.positions[s][t * self.k_signals() + k])
    }

    /// Total demand of a tracked agent at tick t, signal positions then feedback.
    pub fn agent_total_demand(&self, agent: usize, t: usize) -> Result<f64> {
        let s = self.slot(agent)?;
        let k = self.k_signals();
        let q = &self.positions[s][t * k..(t + 1) * k];
        Ok(q.iter().sum::<f64>() + self.feedback_positions[s][t])
    }

    /// (v_{t+1} − p_t)·Σ_k q_{i,k}(t) for t = 0..T−2.
    pub fn realized_profit(&self, agent: usize) -> Result<Vec<f64>> {
        let s = self.slot(agent)?;
        let k = self.k_signals();
        Ok((0..self.ticks.len().saturating_sub(1))
            .map(|t| {
                let q: f64 = self.positions[s][t * k..(t + 1) * k].iter().sum();
                (self.ticks[t + 1].v - self.ticks[t].p) * q
            })
            .collect())
    }

    pub fn pricing_errors(&self) -> Vec<f64> {
        self.ticks.iter().map(|r| r.p - r.v).collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let k = self.k_signals();
        let mut header: Vec<String> = ["t", "v", "p", "order_flow", "noise_flow"].iter().map(|s| s.to_string()).collect();
        header.extend((1..=k).map(|i| format!("f_{i}")));
        out.write_record(&header)?;
        for r in &self.ticks {
            let mut row = vec![
                r.t.to_string(),
                format!("{:e}", r.v),
                format!("{:e}", r.p),
                format!("{:e}", r.order_flow),
                format!("{:e}", r.noise_flow),
            ];
            row.extend(r.per_signal_f.iter().map(|f| format!("{f:e}")));
            out.write_record(&row)?;
        }
        out.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// p = prior + λ·flow.
pub fn price_update(prior_mean: f64, order_flow: f64, lam: f64) -> Result<f64> {
    if !(lam > 0.0) {
        return Err(MarketError::Domain(format!("lambda must be > 0, got {lam}")));
    }
    Ok(prior_mean + lam * order_flow)
}

/// Runs the default population with every agent tracked.
pub fn run_market(params: &ModelParams, horizon: usize, seed: u64) -> Result<MarketPath> {
    let cfg = MarketConfig {
        tracking: Tracking::All,
        ..MarketConfig::default()
    };
    run_market_with(params, &cfg, horizon, seed)
}

pub fn run_market_with(params: &ModelParams, cfg: &MarketConfig, horizon: usize, seed: u64) -> Result<MarketPath> {
    let agents = AgentSpec::population(params.n_institutions, params.phi, params.d_bench);
    run_market_agents(params, cfg, agents, horizon, seed)
}

/// Full tick loop for an explicit population.
///
/// Per tick: public jump in v̄, signal draws, demands (signal positions plus
/// risk-management feedback for AI agents), noise flow, price, fundamental,
/// post-arbitrage returns, then f_k advances by the exact OU transition with
/// the AI consensus ψ_k arbitraged at rate δ_k.
pub fn run_market_agents(
    params: &ModelParams,
    cfg: &MarketConfig,
    agents: Vec<AgentSpec>,
    horizon: usize,
    seed: u64,
) -> Result<MarketPath> {
    if horizon < 1 {
        return Err(MarketError::Domain("horizon must be >= 1".into()));
    }
    params.validate()?;
    let k_sig = params.k_signals();
    cfg.validate(k_sig)?;
    if agents.is_empty() {
        return Err(MarketError::Domain("need at least one agent".into()));
    }
    let n = agents.len() as f64;
    let n_ai = agents.iter().filter(|a| a.kind == AgentKind::Ai).count();
    let phi = n_ai as f64 / n;
    let m = &params.market;
    let dt = 1.0 / cfg.ticks_per_month;
    let r_h = (m.sigma_eta * m.sigma_eta / (m.sigma_h * m.sigma_h)).min(1.0);
    let beta_fb = cfg.feedback_beta.unwrap_or(params.beta);
    let a_bar = if k_sig > 0 {
        params.signals.iter().map(|s| s.a).sum::<f64>() / k_sig as f64
    } else {
        0.0
    };
    let ewma_w = 2.0 / (cfg.ewma_span + 1.0);

    let tracked: Vec<usize> = match &cfg.tracking {
        Tracking::None => Vec::new(),
        Tracking::All => (0..agents.len()).collect(),
        Tracking::Agents(ids) => {
            if ids.iter().any(|&i| i >= agents.len()) {
                return Err(MarketError::Domain("tracked agent out of range".into()));
            }
            ids.clone()
        }
    };
    let mut slot_of = vec![usize::MAX; agents.len()];
    for (s, &i) in tracked.iter().enumerate() {
        slot_of[i] = s;
    }
    let mut positions = vec![Vec::with_capacity(horizon * k_sig); tracked.len()];
    let mut feedback_positions = vec![Vec::with_capacity(horizon); tracked.len()];

    let mut rng = rng_from(derive_seed(seed, stream::MARKET, 0));
    let mut signals = params.signals.clone();
    let mut f: Vec<f64> = match &cfg.initial_f {
        Some(f0) => f0.clone(),
        None => signals
            .iter()
            .map(|s| (s.sigma0_sq / (2.0 * s.theta)).sqrt() * rng.sample::<f64, _>(StandardNormal))
            .collect(),
    };
    let mut vbar = cfg.vbar;
    let mut s_hat = 0.0;
    let mut hist: VecDeque<f64> = std::iter::repeat_n(vbar, cfg.feedback_window + 1).collect();
    let mut obs = Observations::default();
    let mut psi = vec![0.0; k_sig];
    let mut ticks = Vec::with_capacity(horizon);

    for t in 0..horizon {
        if let Some(ev) = &cfg.stress {
            if t == ev.tick {
                vbar *= 1.0 - ev.shock;
                if let Some(r) = ev.stress_rho {
                    for s in &mut signals {
                        s.rho = r;
                    }
                }
            }
        }
        let rho_bar = if k_sig > 0 {
            signals.iter().map(|s| s.rho).sum::<f64>() / k_sig as f64
        } else {
            0.0
        };
        let lam = kyle_lambda(m, phi, rho_bar)?;
        let gain = phi * rho_bar * beta_fb / m.lambda_prime;
        let absorbed = (lam * n * a_bar * (phi + (1.0 - phi) * r_h)).min(1.0);

        let ju: f64 = rng.random();
        let jz: f64 = rng.sample(StandardNormal);
        if ju < cfg.jump_rate {
            vbar += cfg.jump_sd * jz;
        }

        generate_signals(&f, &agents, &signals, m, &mut rng, &mut obs);

        let dp = hist[hist.len() - 1] - hist[0];
        let fb_total = if cfg.feedback && n_ai > 0 { gain / lam * dp } else { 0.0 };
        let fb_each = if n_ai > 0 { fb_total / n_ai as f64 } else { 0.0 };

        psi.iter_mut().for_each(|x| *x = 0.0);
        let mut informed = 0.0;
        let mut feedback_flow = 0.0;
        for (i, ag) in agents.iter().enumerate() {
            let x = obs.agent(i);
            let mut demand = 0.0;
            let track = slot_of[i] != usize::MAX;
            for k in 0..k_sig {
                let q = match ag.kind {
                    AgentKind::Ai => {
                        psi[k] += x[k];
                        agent_demand(x[k], &signals[k])
                    }
                    AgentKind::Human => agent_demand(r_h * x[k], &signals[k]),
                };
                demand += q;
                if track {
                    positions[slot_of[i]].push(q);
                }
            }
            let fb = if ag.kind == AgentKind::Ai { fb_each } else { 0.0 };
            demand += fb;
            feedback_flow += fb;
            if track {
                feedback_positions[slot_of[i]].push(fb);
            }
            informed += demand;
        }
        for k in 0..k_sig {
            psi[k] = if n_ai > 0 { psi[k] / n_ai as f64 } else { f[k] };
        }

        let noise = m.sigma_u * rng.sample::<f64, _>(StandardNormal);
        let order_flow = informed + noise;
        let prior = vbar + cfg.xi * (1.0 - absorbed) * s_hat;
        let p = price_update(prior, order_flow, lam)?;
        let v = vbar + f.iter().sum::<f64>() + m.sigma_eps * rng.sample::<f64, _>(StandardNormal);

        let mut r_obs = Vec::with_capacity(k_sig);
        let mut deltas = Vec::with_capacity(k_sig);
        for k in 0..k_sig {
            let s = &signals[k];
            let delta = n * phi * s.rho * s.a / lam;
            let pi = delta / (s.theta + delta);
            let e: f64 = rng.sample(StandardNormal);
            r_obs.push(s.beta_cf * (f[k] - pi * psi[k]) + m.sigma_eps * e);
            deltas.push(delta);
        }

        ticks.push(TickRecord {
            t,
            v,
            vbar,
            p,
            order_flow,
            noise_flow: noise,
            feedback_flow,
            per_signal_f: f.clone(),
            r_obs,
        });

        s_hat = (1.0 - ewma_w) * s_hat + ewma_w * (p - vbar);
        hist.pop_front();
        hist.push_back(p);

        for k in 0..k_sig {
            let s = &signals[k];
            let decay = (-s.theta * dt).exp();
            let arb = 1.0 - (-deltas[k] * dt).exp();
            let sd = (s.sigma0_sq * (1.0 - decay * decay) / (2.0 * s.theta)).sqrt();
            let z: f64 = rng.sample(StandardNormal);
            f[k] = decay * (f[k] - arb * psi[k]) + sd * z;
        }
    }

    Ok(MarketPath {
        ticks,
        agents,
        tracked,
        positions,
        feedback_positions,
        params: params.clone(),
        config: cfg.clone(),
        seed,
    })
}

/// Monthly mean post-arbitrage return after an impulse of `impulse_sd`
/// stationary standard deviations in every signal, averaged over signals and
/// `reps` replications.
pub fn signal_return_series(
    params: &ModelParams,
    cfg: &MarketConfig,
    months: usize,
    reps: usize,
    impulse_sd: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    if months < 1 || reps < 1 {
        return Err(MarketError::Domain("months and reps must be >= 1".into()));
    }
    let per_month = cfg.ticks_per_month.round() as usize;
    let f0: Vec<f64> = params
        .signals
        .iter()
        .map(|s| impulse_sd * (s.sigma0_sq / (2.0 * s.theta)).sqrt())
        .collect();
    let run_cfg = MarketConfig {
        initial_f: Some(f0),
        tracking: Tracking::None,
        ..cfg.clone()
    };
    let k = params.k_signals().max(1) as f64;
    let per_rep: Vec<Result<Vec<f64>>> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let path = run_market_with(params, &run_cfg, months * per_month, derive_seed(seed, stream::HALF_LIFE, r as u64))?;
            Ok(path
                .ticks
                .chunks(per_month)
                .map(|c| c.iter().map(|t| t.r_obs.iter().sum::<f64>()).sum::<f64>() / (c.len() as f64 * k))
                .collect())
        })
        .collect();
    let mut acc = vec![0.0; months];
    for rep in per_rep {
        for (a, x) in acc.iter_mut().zip(rep?) {
            *a += x / reps as f64;
        }
    }
    Ok(acc)
}
