//! Coupled erosion across K signals with extinction and capital reallocation.

use std::io::Write;

use model_core::seed::{stream, stream_rng};
use model_core::ModelParams;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::erosion::{erosion_step, extinction_threshold, trading_intensity, vulnerability_index, SignalState, SignalStatus};
use crate::error::{DynamicsError, Result};

/// Adoption path over retraining epochs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "UPPERCASE", deny_unknown_fields)]
pub enum PhiSchedule {
    Constant { phi: f64 },
    /// Linear ramp from `from` at epoch 0 to `to` at the last epoch.
    Linear { from: f64, to: f64 },
    /// Explicit per-epoch values; the last value is held afterwards.
    Table { values: Vec<f64> },
}

impl PhiSchedule {
    pub fn phi_at(&self, epoch: usize, epochs: usize) -> f64 {
        match self {
            PhiSchedule::Constant { phi } => *phi,
            PhiSchedule::Linear { from, to } => {
                if epochs <= 1 {
                    *from
                } else {
                    let t = (epoch.min(epochs - 1)) as f64 / (epochs - 1) as f64;
                    from + (to - from) * t
                }
            }
            PhiSchedule::Table { values } => values[epoch.min(values.len() - 1)],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            PhiSchedule::Constant { phi } => phi.is_finite() && *phi >= 0.0,
            PhiSchedule::Linear { from, to } => from.is_finite() && to.is_finite() && *from >= 0.0 && *to >= 0.0,
            PhiSchedule::Table { values } => !values.is_empty() && values.iter().all(|v| v.is_finite() && *v >= 0.0),
        };
        if ok {
            Ok(())
        } else {
            Err(DynamicsError::Domain(format!("invalid phi schedule {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CascadeConfig {
    /// EXTINCT once σ² < floor·σ²(0).
    #[serde(default = "default_floor")]
    pub extinction_floor: f64,
    /// Regeneration ceiling as a multiple of σ²(0); `None` lets σ² grow without bound.
    #[serde(default = "default_ceiling")]
    pub regeneration_ceiling: Option<f64>,
}

fn default_floor() -> f64 {
    1e-4
}

fn default_ceiling() -> Option<f64> {
    Some(1.0)
}

impl Default for CascadeConfig {
    fn default() -> Self {
        CascadeConfig {
            extinction_floor: default_floor(),
            regeneration_ceiling: default_ceiling(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeEvent {
    pub signal_index: usize,
    pub epoch: usize,
    pub vulnerability: f64,
    /// (survivor index, φ* after reallocation).
    pub post_thresholds: Vec<(usize, f64)>,
    /// Survivor thresholds just before this extinction, same order.
    pub pre_thresholds: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub phi: f64,
    pub sigma_sq: Vec<f64>,
    pub intensity: Vec<f64>,
    pub status: Vec<SignalStatus>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErosionTrace {
    pub records: Vec<EpochRecord>,
    pub schedule: PhiSchedule,
    pub seed: u64,
    pub epochs: usize,
}

impl ErosionTrace {
    /// Long format: epoch, signal_index, sigma_sq, intensity, status.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["epoch", "signal_index", "sigma_sq", "intensity", "status"])?;
        for r in &self.records {
            for k in 0..r.sigma_sq.len() {
                out.write_record([
                    r.epoch.to_string(),
                    k.to_string(),
                    format!("{:e}", r.sigma_sq[k]),
                    format!("{:e}", r.intensity[k]),
                    r.status[k].as_str().to_string(),
                ])?;
            }
        }
        out.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

pub fn write_events_csv<W: Write>(events: &[CascadeEvent], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["signal_index", "epoch", "vulnerability"])?;
    for e in events {
        out.write_record([e.signal_index.to_string(), e.epoch.to_string(), format!("{:e}", e.vulnerability)])?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn cascade_simulate(
    params: &ModelParams,
    phi: f64,
    epochs: usize,
    seed: u64,
) -> Result<(ErosionTrace, Vec<CascadeEvent>)> {
    cascade_simulate_schedule(params, &PhiSchedule::Constant { phi }, epochs, seed, &CascadeConfig::default())
}

/// Runs the erosion recursion for `epochs` steps under an adoption schedule.
///
/// Each epoch: intensity from the current f, σ² update, extinction check,
/// then f advances one month by the exact OU transition using the new σ².
pub fn cascade_simulate_schedule(
    params: &ModelParams,
    schedule: &PhiSchedule,
    epochs: usize,
    seed: u64,
    cfg: &CascadeConfig,
) -> Result<(ErosionTrace, Vec<CascadeEvent>)> {
    if epochs < 1 {
        return Err(DynamicsError::Domain("epochs must be >= 1".into()));
    }
    schedule.validate()?;
    if !(cfg.extinction_floor > 0.0 && cfg.extinction_floor < 1.0) {
        return Err(DynamicsError::Domain("extinction_floor must lie in (0,1)".into()));
    }
    params.validate()?;
    let k_sig = params.k_signals();
    let n = params.n();
    let mut rng = stream_rng(seed, stream::CASCADE, 0);

    let mut states: Vec<SignalState> = params
        .signals
        .iter()
        .map(|s| {
            let f = (s.sigma0_sq / (2.0 * s.theta)).sqrt() * rng.sample::<f64, _>(StandardNormal);
            SignalState::new(s.clone(), f)
        })
        .collect();
    let alpha0: Vec<f64> = params.signals.iter().map(|s| s.sigma0_sq / (2.0 * s.theta)).collect();

    let mut records = Vec::with_capacity(epochs + 1);
    let mut events = Vec::new();
    let snapshot = |states: &[SignalState], epoch: usize, phi: f64| EpochRecord {
        epoch,
        phi,
        sigma_sq: states.iter().map(|s| s.sigma_sq).collect(),
        intensity: states
            .iter()
            .map(|s| if s.status == SignalStatus::Extinct { 0.0 } else { trading_intensity(s, phi, n) })
            .collect(),
        status: states.iter().map(|s| s.status).collect(),
    };

    for t in 0..epochs {
        let phi = schedule.phi_at(t, epochs);
        let rec = snapshot(&states, t, phi);
        let mut newly = Vec::new();
        for (k, st) in states.iter_mut().enumerate() {
            if st.status == SignalStatus::Extinct {
                continue;
            }
            let out = erosion_step(st, rec.intensity[k], params.beta, params.kappa, params.i_max)?;
            let mut s2 = out.sigma_sq;
            if let Some(c) = cfg.regeneration_ceiling {
                s2 = s2.min(c * st.spec.sigma0_sq);
            }
            st.sigma_sq = s2;
            st.epoch = t + 1;
            if s2 < cfg.extinction_floor * st.spec.sigma0_sq {
                st.status = SignalStatus::Extinct;
                newly.push(k);
            } else if out.factor < 1.0 {
                st.status = SignalStatus::Compressing;
            } else {
                st.status = SignalStatus::Regenerating;
            }
        }
        records.push(rec);

        // Same-epoch extinctions: most compressed first.
        newly.sort_by(|&i, &j| {
            let ri = states[i].sigma_sq / states[i].spec.sigma0_sq;
            let rj = states[j].sigma_sq / states[j].spec.sigma0_sq;
            ri.total_cmp(&rj).then(i.cmp(&j))
        });
        let mut dead: Vec<bool> = states.iter().map(|s| s.status == SignalStatus::Extinct).collect();
        for &k in &newly {
            dead[k] = false;
        }
        for &k in &newly {
            let vulnerability = vulnerability_index(&states[k].spec, params.kappa);
            let survivors: Vec<usize> = (0..k_sig).filter(|&j| j != k && !dead[j]).collect();
            let pre_thresholds = thresholds(&states, &survivors, params)?;
            let before: f64 = (0..k_sig).filter(|&j| !dead[j]).map(|j| alpha0[j]).sum();
            dead[k] = true;
            let after: f64 = survivors.iter().map(|&j| alpha0[j]).sum();
            if after > 0.0 {
                let scale = (after / before).powf(-1.0 / params.kappa);
                for &j in &survivors {
                    states[j].spec.a *= scale;
                }
            }
            let post_thresholds = thresholds(&states, &survivors, params)?;
            events.push(CascadeEvent {
                signal_index: k,
                epoch: t,
                vulnerability,
                post_thresholds,
                pre_thresholds,
            });
        }

        for st in states.iter_mut() {
            if st.status == SignalStatus::Extinct {
                continue;
            }
            let th = st.spec.theta;
            let decay = (-th).exp();
            let sd = (st.sigma_sq * (1.0 - decay * decay) / (2.0 * th)).sqrt();
            st.f = st.f * decay + sd * rng.sample::<f64, _>(StandardNormal);
        }
    }
    let last = schedule.phi_at(epochs, epochs);
    records.push(snapshot(&states, epochs, last));

    Ok((
        ErosionTrace {
            records,
            schedule: schedule.clone(),
            seed,
            epochs,
        },
        events,
    ))
}

fn thresholds(states: &[SignalState], idx: &[usize], params: &ModelParams) -> Result<Vec<(usize, f64)>> {
    idx.iter()
        .map(|&j| Ok((j, extinction_threshold(&states[j].spec, params, params.beta)?.value())))
        .collect()
}

/// Five heterogeneous fast-mixing signals with well-separated vulnerabilities,
/// run under a 0→1 adoption ramp over `FIXTURE_EPOCHS` epochs.
pub fn heterogeneous_fixture() -> (ModelParams, PhiSchedule) {
    let mut p = ModelParams::baseline();
    let rho = [0.8, 0.6, 0.5, 0.4, 0.3];
    let a = [52.2, 50.1, 44.6, 53.7, 66.8];
    let g = [0.01, 0.015, 0.02, 0.03, 0.04];
    p.signals = (0..5)
        .map(|k| model_core::SignalSpec {
            theta: 1.0,
            sigma0_sq: 0.02,
            rho: rho[k],
            a: a[k],
            g: g[k],
            beta_cf: 1.0,
        })
        .collect();
    p.phi = 0.0;
    p.beta = 0.25;
    p.kappa = 1.0;
    p.i_max = 10.0;
    (p, PhiSchedule::Linear { from: 0.0, to: 1.0 })
}

pub const FIXTURE_EPOCHS: usize = 4000;
