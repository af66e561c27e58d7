//! Rolling cross-sectional return dispersion and a calibrated fund panel.

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use model_core::seed::{stream, stream_rng};
use model_core::{cross_sectional_dispersion, decay_at, stationary_alpha, ModelParams};

use crate::error::{domain, Result};
use crate::panel::{Group, GroupFilter};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispersionSeries {
    /// Month index of the last month in each window.
    pub months: Vec<usize>,
    pub values: Vec<f64>,
}

impl DispersionSeries {
    pub fn first(&self) -> f64 {
        self.values[0]
    }

    pub fn last(&self) -> f64 {
        *self.values.last().unwrap()
    }

    /// 1 − last/first.
    pub fn decline(&self) -> f64 {
        1.0 - self.last() / self.first()
    }
}

fn sample_sd(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Trailing `window`-month mean of the monthly cross-sectional SD.
/// `returns[f][t]` is fund f's return in month t.
pub fn return_dispersion(returns: &[Vec<f64>], labels: &[Group], window: usize, filter: GroupFilter) -> Result<DispersionSeries> {
    if window < 2 {
        return Err(domain("window must be >= 2"));
    }
    if filter == GroupFilter::Cross {
        return Err(domain("dispersion needs a fund group, not a pair filter"));
    }
    if labels.len() != returns.len() {
        return Err(domain(format!("{} labels for {} funds", labels.len(), returns.len())));
    }
    let funds: Vec<&Vec<f64>> = returns.iter().zip(labels).filter(|(_, &g)| filter.admits(g)).map(|(r, _)| r).collect();
    if funds.len() < 2 {
        return Err(domain(format!("{} funds pass the filter, need 2", funds.len())));
    }
    let months = funds[0].len();
    if funds.iter().any(|r| r.len() != months) {
        return Err(domain("funds have different return lengths"));
    }
    if months < window {
        return Err(domain(format!("{months} months is shorter than the window {window}")));
    }
    let mut col = vec![0.0; funds.len()];
    let sd: Vec<f64> = (0..months)
        .map(|t| {
            for (c, r) in col.iter_mut().zip(&funds) {
                *c = r[t];
            }
            sample_sd(&col)
        })
        .collect();
    let mut out = DispersionSeries {
        months: Vec::new(),
        values: Vec::new(),
    };
    for end in window - 1..months {
        out.months.push(end);
        out.values.push(sd[end + 1 - window..=end].iter().sum::<f64>() / window as f64);
    }
    Ok(out)
}

/// Affine map from model alpha (variance units) to annualized percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlphaUnitMap {
    pub scale: f64,
    pub offset: f64,
}

impl AlphaUnitMap {
    pub fn apply(&self, alpha: f64) -> f64 {
        self.scale * alpha + self.offset
    }

    /// The map sending `from.0 → to.0` and `from.1 → to.1`.
    pub fn through(from: (f64, f64), to: (f64, f64)) -> Result<Self> {
        if from.0 == from.1 {
            return Err(domain("anchor points must differ"));
        }
        let scale = (to.1 - to.0) / (from.1 - from.0);
        Ok(AlphaUnitMap {
            scale,
            offset: to.0 - scale * from.0,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FundPanelConfig {
    pub params: ModelParams,
    pub n_ai: usize,
    pub n_human: usize,
    pub months: usize,
    pub phi_start: f64,
    pub phi_end: f64,
    /// Cross-sectional SD of AI fund returns at `phi_start`.
    pub ai_dispersion_start: f64,
    pub human_dispersion_start: f64,
    /// Signal-driven over idiosyncratic variance of human funds at `phi_start`.
    pub human_signal_ratio: f64,
    pub market_mean: f64,
    pub market_sd: f64,
    pub window: usize,
    /// Optional map applied to the median AI alpha path; `None` reports model units.
    pub alpha_units: Option<AlphaUnitMap>,
}

impl Default for FundPanelConfig {
    fn default() -> Self {
        FundPanelConfig {
            params: ModelParams::baseline(),
            n_ai: 100,
            n_human: 100,
            months: 180,
            phi_start: 0.40,
            phi_end: 0.70,
            ai_dispersion_start: 0.041,
            human_dispersion_start: 0.050,
            human_signal_ratio: 0.613,
            market_mean: 0.006,
            market_sd: 0.04,
            window: 12,
            alpha_units: None,
        }
    }
}

impl FundPanelConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.n_ai < 2 || self.n_human < 2 {
            return Err(domain("need at least 2 funds per group"));
        }
        if self.months < self.window || self.window < 2 {
            return Err(domain("need window >= 2 and months >= window"));
        }
        for phi in [self.phi_start, self.phi_end] {
            if !(0.0..=1.0).contains(&phi) {
                return Err(domain(format!("phi {phi} outside [0,1]")));
            }
        }
        if !(self.ai_dispersion_start > 0.0 && self.human_dispersion_start > 0.0 && self.human_signal_ratio >= 0.0) {
            return Err(domain("dispersion levels must be positive"));
        }
        if !(self.market_sd >= 0.0) {
            return Err(domain("market_sd must be >= 0"));
        }
        Ok(())
    }

    fn phi_at(&self, t: usize) -> f64 {
        let span = (self.months - 1).max(1) as f64;
        self.phi_start + (self.phi_end - self.phi_start) * t as f64 / span
    }

    fn mean_theta_eff(&self, phi: f64) -> Result<f64> {
        let k = self.params.k_signals();
        let mut acc = 0.0;
        for i in 0..k {
            acc += decay_at(&self.params, i, phi)?.theta_eff;
        }
        Ok(acc / k as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FundPanel {
    pub returns: Vec<Vec<f64>>,
    pub labels: Vec<Group>,
    pub phi: Vec<f64>,
    /// Idiosyncratic SD per month used for each group.
    pub sd_ai: Vec<f64>,
    pub sd_human: Vec<f64>,
    /// Stationary alpha of the median AI signal per month.
    pub ai_alpha: Vec<f64>,
}

/// Monthly fund returns r = market + σ_g(t)·e with φ rising linearly.
///
/// σ_AI(t) follows the closed-form AI dispersion D(φ_t); human funds mix an
/// idiosyncratic part b with a signal part c/θ_eff(φ_t):
/// σ_H ∝ √(b² + c²/θ_eff²), normalized to the configured starting levels.
pub fn simulate_fund_panel(cfg: &FundPanelConfig, seed: u64) -> Result<FundPanel> {
    cfg.validate()?;
    let d0 = cross_sectional_dispersion(&cfg.params, cfg.phi_start)?;
    if !(d0 > 0.0) {
        return Err(domain("AI dispersion is zero at phi_start"));
    }
    let th0 = cfg.mean_theta_eff(cfg.phi_start)?;
    let r = cfg.human_signal_ratio;
    let mut phi = Vec::with_capacity(cfg.months);
    let mut sd_ai = Vec::with_capacity(cfg.months);
    let mut sd_human = Vec::with_capacity(cfg.months);
    let mut ai_alpha = Vec::with_capacity(cfg.months);
    for t in 0..cfg.months {
        let p = cfg.phi_at(t);
        let th = cfg.mean_theta_eff(p)?;
        phi.push(p);
        sd_ai.push(cfg.ai_dispersion_start * cross_sectional_dispersion(&cfg.params, p)? / d0);
        sd_human.push(cfg.human_dispersion_start * ((1.0 + r * (th0 / th).powi(2)) / (1.0 + r)).sqrt());
        let mut alphas = Vec::with_capacity(cfg.params.k_signals());
        for (k, s) in cfg.params.signals.iter().enumerate() {
            alphas.push(stationary_alpha(s, decay_at(&cfg.params, k, p)?.theta_eff)?);
        }
        alphas.sort_by(f64::total_cmp);
        let med = alphas[alphas.len() / 2];
        ai_alpha.push(cfg.alpha_units.map_or(med, |u| u.apply(med)));
    }
    let mut rng = stream_rng(seed, stream::DISPERSION, 0);
    let market: Vec<f64> = (0..cfg.months)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            cfg.market_mean + cfg.market_sd * z
        })
        .collect();
    let n = cfg.n_ai + cfg.n_human;
    let labels: Vec<Group> = (0..n).map(|i| if i < cfg.n_ai { Group::Ai } else { Group::NonAi }).collect();
    let returns = labels
        .iter()
        .map(|g| {
            let sd = if *g == Group::Ai { &sd_ai } else { &sd_human };
            (0..cfg.months)
                .map(|t| {
                    let e: f64 = rng.sample(StandardNormal);
                    market[t] + sd[t] * e
                })
                .collect()
        })
        .collect();
    Ok(FundPanel {
        returns,
        labels,
        phi,
        sd_ai,
        sd_human,
        ai_alpha,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispersionReport {
    pub ai: DispersionSeries,
    pub human: DispersionSeries,
    pub ai_decline: f64,
    pub human_decline: f64,
    pub ratio_start: f64,
    pub ratio_end: f64,
}

impl DispersionReport {
    pub fn from_panel(panel: &FundPanel, window: usize) -> Result<Self> {
        let ai = return_dispersion(&panel.returns, &panel.labels, window, GroupFilter::Ai)?;
        let human = return_dispersion(&panel.returns, &panel.labels, window, GroupFilter::NonAi)?;
        Ok(DispersionReport {
            ai_decline: ai.decline(),
            human_decline: human.decline(),
            ratio_start: ai.first() / human.first(),
            ratio_end: ai.last() / human.last(),
            ai,
            human,
        })
    }

    /// Columns: month, phi, d_ai, d_human, ratio, ai_alpha.
    pub fn write_csv<W: Write>(&self, panel: &FundPanel, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["month", "phi", "d_ai", "d_human", "ratio", "ai_alpha"])?;
        for (k, &m) in self.ai.months.iter().enumerate() {
            let (a, h) = (self.ai.values[k], self.human.values[k]);
            out.write_record([
                m.to_string(),
                format!("{:.6}", panel.phi[m]),
                format!("{a:.8}"),
                format!("{h:.8}"),
                format!("{:.8}", a / h),
                format!("{:.8}", panel.ai_alpha[m]),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}
