//! Synthetic 13F-style holdings with calibrated convergence paths.
//!
//! Institution i scores asset a in quarter t as
//! `loading·κ_g(t)·m_a + s·z_ia(t)`, with m a common factor and z an AR(1)
//! idiosyncratic term, holds its top `holdings` assets and weights them by a
//! softmax of the scores. The truncation matters: with a dense softmax of
//! Gaussian scores the lognormal weights have a cosine similarity of e^{−s²}
//! whatever κ is. Each quarter, κ for each group is solved by bisection so the
//! realized within-group index hits its target path.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use model_core::seed::{stream, stream_rng};

use crate::error::{domain, AnalyticsError, Result};
use crate::panel::{quarter_labels, quarter_offset, Group, HoldingsPanel, SparseWeights};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergenceTargets {
    /// Within-group index of both groups over the first window.
    pub start_level: f64,
    /// Relative rise of the AI–AI index, first window to last window.
    pub ai_rise: f64,
    pub non_ai_rise: f64,
    /// Quarters averaged at each end.
    pub window: usize,
    pub ai_fraction: f64,
    pub start_quarter: String,
    /// Quarters where the AI schedule steps up.
    pub breaks: Vec<String>,
    /// Share of the AI rise delivered by the steps; the rest is a linear trend.
    pub break_share: f64,
    pub holdings: usize,
    pub noise_sd: f64,
    pub noise_persistence: f64,
    /// 0 gives a pure-noise panel and skips calibration.
    pub factor_loading: f64,
    pub kappa_max: f64,
}

impl Default for ConvergenceTargets {
    fn default() -> Self {
        ConvergenceTargets {
            start_level: 0.21,
            ai_rise: 0.58,
            non_ai_rise: 0.19,
            window: 4,
            ai_fraction: 0.65,
            start_quarter: "2013Q1".into(),
            breaks: vec!["2018Q2".into(), "2020Q3".into(), "2023Q1".into()],
            break_share: 0.6,
            holdings: 60,
            noise_sd: 1.0,
            noise_persistence: 0.8,
            factor_loading: 1.0,
            kappa_max: 25.0,
        }
    }
}

impl ConvergenceTargets {
    pub fn validate(&self) -> Result<()> {
        if !(self.start_level > 0.0 && self.start_level < 1.0) {
            return Err(domain("start_level must lie in (0,1)"));
        }
        if !(self.ai_rise > -1.0 && self.non_ai_rise > -1.0) {
            return Err(domain("relative rises must exceed -1"));
        }
        if self.window < 1 {
            return Err(domain("window must be >= 1"));
        }
        if !(self.ai_fraction > 0.0 && self.ai_fraction < 1.0) {
            return Err(domain("ai_fraction must lie in (0,1)"));
        }
        if !(0.0..=1.0).contains(&self.break_share) {
            return Err(domain("break_share must lie in [0,1]"));
        }
        if self.holdings < 1 {
            return Err(domain("holdings must be >= 1"));
        }
        if !(self.noise_sd > 0.0) || !(0.0..1.0).contains(&self.noise_persistence) {
            return Err(domain("need noise_sd > 0 and noise_persistence in [0,1)"));
        }
        if !(self.factor_loading >= 0.0) || !(self.kappa_max > 0.0) {
            return Err(domain("need factor_loading >= 0 and kappa_max > 0"));
        }
        Ok(())
    }

    /// Break positions as quarter indices.
    pub fn break_indices(&self, quarters: usize) -> Result<Vec<usize>> {
        self.breaks
            .iter()
            .map(|b| {
                let k = quarter_offset(&self.start_quarter, b)?;
                if k < 1 || k as usize >= quarters {
                    return Err(domain(format!("break {b} lies outside the sample")));
                }
                Ok(k as usize)
            })
            .collect()
    }

    /// Target AI–AI and NON_AI–NON_AI index per quarter.
    pub fn target_paths(&self, quarters: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        if quarters < 2 * self.window {
            return Err(domain(format!("{quarters} quarters cannot hold two windows of {}", self.window)));
        }
        let breaks = self.break_indices(quarters)?;
        let span = (quarters - 1) as f64;
        let nb = breaks.len().max(1) as f64;
        let trend_share = if breaks.is_empty() { 1.0 } else { 1.0 - self.break_share };
        let ai_raw: Vec<f64> = (0..quarters)
            .map(|t| {
                let steps = breaks.iter().filter(|&&b| b <= t).count() as f64;
                trend_share * t as f64 / span + (1.0 - trend_share) * steps / nb
            })
            .collect();
        let lin: Vec<f64> = (0..quarters).map(|t| t as f64 / span).collect();
        let shape = |raw: &[f64], rise: f64| -> Vec<f64> {
            let w = self.window;
            let head = raw[..w].iter().sum::<f64>() / w as f64;
            let tail = raw[raw.len() - w..].iter().sum::<f64>() / w as f64;
            raw.iter()
                .map(|r| self.start_level * (1.0 + rise * (r - head) / (tail - head)))
                .collect()
        };
        Ok((shape(&ai_raw, self.ai_rise), shape(&lin, self.non_ai_rise)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticThirteenF {
    pub panel: HoldingsPanel,
    pub kappa_ai: Vec<f64>,
    pub kappa_non_ai: Vec<f64>,
    pub target_ai: Vec<f64>,
    pub target_non_ai: Vec<f64>,
}

struct Scorer<'a> {
    m: &'a [f64],
    loading: f64,
    noise_sd: f64,
    holdings: usize,
}

impl Scorer<'_> {
    fn weights(&self, z: &[f64], kappa: f64, order: &mut Vec<u32>, score: &mut Vec<f64>) -> SparseWeights {
        let c = self.loading * kappa;
        score.clear();
        score.extend(self.m.iter().zip(z).map(|(m, z)| c * m + self.noise_sd * z));
        order.clear();
        order.extend(0..score.len() as u32);
        let h = self.holdings.min(score.len());
        if h < score.len() {
            order.select_nth_unstable_by(h - 1, |&a, &b| score[b as usize].total_cmp(&score[a as usize]));
        }
        let top = &mut order[..h];
        top.sort_unstable();
        let mx = top.iter().map(|&a| score[a as usize]).fold(f64::NEG_INFINITY, f64::max);
        let val: Vec<f64> = top.iter().map(|&a| (score[a as usize] - mx).exp()).collect();
        let sum: f64 = val.iter().sum();
        SparseWeights {
            idx: top.to_vec(),
            val: val.into_iter().map(|v| v / sum).collect(),
        }
    }

    /// Rows of `members` at κ together with their mean pairwise cosine,
    /// computed from the sum of unit vectors.
    fn group(&self, z: &[Vec<f64>], members: &[usize], kappa: f64, acc: &mut [f64]) -> (Vec<SparseWeights>, f64) {
        let (mut order, mut score) = (Vec::new(), Vec::new());
        acc.iter_mut().for_each(|x| *x = 0.0);
        let rows: Vec<SparseWeights> = members
            .iter()
            .map(|&i| {
                let w = self.weights(&z[i], kappa, &mut order, &mut score);
                let n = w.norm();
                for (&a, &x) in w.idx.iter().zip(&w.val) {
                    acc[a as usize] += x / n;
                }
                w
            })
            .collect();
        let k = members.len() as f64;
        let s2: f64 = acc.iter().map(|x| x * x).sum();
        (rows, (s2 - k) / (k * (k - 1.0)))
    }
}

fn calibrate(
    scorer: &Scorer,
    z: &[Vec<f64>],
    members: &[usize],
    target: f64,
    kappa_max: f64,
    acc: &mut [f64],
    label: &str,
) -> Result<(f64, Vec<SparseWeights>)> {
    let (rows0, s0) = scorer.group(z, members, 0.0, acc);
    if s0 >= target {
        return Ok((0.0, rows0));
    }
    let (_, s_hi) = scorer.group(z, members, kappa_max, acc);
    if s_hi < target {
        return Err(AnalyticsError::Calibration(format!(
            "{label}: target {target:.4} exceeds the reachable index {s_hi:.4} at kappa {kappa_max}"
        )));
    }
    let (mut lo, mut hi) = (0.0, kappa_max);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let (_, s) = scorer.group(z, members, mid, acc);
        if (s - target).abs() < 1e-7 {
            lo = mid;
            hi = mid;
            break;
        }
        if s < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let kappa = 0.5 * (lo + hi);
    Ok((kappa, scorer.group(z, members, kappa, acc).0))
}

pub fn generate_synthetic_13f(
    calib: &ConvergenceTargets,
    n_inst: usize,
    n_assets: usize,
    quarters: usize,
    seed: u64,
) -> Result<HoldingsPanel> {
    Ok(generate_synthetic_13f_detailed(calib, n_inst, n_assets, quarters, seed)?.panel)
}

pub fn generate_synthetic_13f_detailed(
    calib: &ConvergenceTargets,
    n_inst: usize,
    n_assets: usize,
    quarters: usize,
    seed: u64,
) -> Result<SyntheticThirteenF> {
    calib.validate()?;
    if n_inst < 4 {
        return Err(domain("need at least 4 institutions"));
    }
    if n_assets < calib.holdings {
        return Err(domain(format!("{n_assets} assets cannot hold {} positions", calib.holdings)));
    }
    let n_ai = ((n_inst as f64 * calib.ai_fraction).round() as usize).clamp(2, n_inst - 2);
    let labels: Vec<Group> = (0..n_inst).map(|i| if i < n_ai { Group::Ai } else { Group::NonAi }).collect();
    let ai: Vec<usize> = (0..n_ai).collect();
    let non: Vec<usize> = (n_ai..n_inst).collect();
    let (target_ai, target_non_ai) = calib.target_paths(quarters)?;
    let labels_q = quarter_labels(&calib.start_quarter, quarters)?;

    let mut rng = stream_rng(seed, stream::THIRTEENF, 0);
    let m: Vec<f64> = (0..n_assets).map(|_| rng.sample(StandardNormal)).collect();
    let mut z: Vec<Vec<f64>> = (0..n_inst)
        .map(|_| (0..n_assets).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    let a = calib.noise_persistence;
    let innov = (1.0 - a * a).sqrt();
    let scorer = Scorer {
        m: &m,
        loading: calib.factor_loading,
        noise_sd: calib.noise_sd,
        holdings: calib.holdings,
    };
    let mut acc = vec![0.0; n_assets];
    let mut rows = Vec::with_capacity(n_inst * quarters);
    let (mut kappa_ai, mut kappa_non_ai) = (Vec::new(), Vec::new());
    for t in 0..quarters {
        if t > 0 {
            for zi in &mut z {
                for x in zi.iter_mut() {
                    let e: f64 = rng.sample(StandardNormal);
                    *x = a * *x + innov * e;
                }
            }
        }
        let (ka, ra, kn, rn) = if calib.factor_loading == 0.0 {
            (0.0, scorer.group(&z, &ai, 0.0, &mut acc).0, 0.0, scorer.group(&z, &non, 0.0, &mut acc).0)
        } else {
            let (ka, ra) = calibrate(&scorer, &z, &ai, target_ai[t], calib.kappa_max, &mut acc, &format!("AI {}", labels_q[t]))?;
            let (kn, rn) =
                calibrate(&scorer, &z, &non, target_non_ai[t], calib.kappa_max, &mut acc, &format!("NON_AI {}", labels_q[t]))?;
            (ka, ra, kn, rn)
        };
        kappa_ai.push(ka);
        kappa_non_ai.push(kn);
        rows.extend(ra);
        rows.extend(rn);
    }
    Ok(SyntheticThirteenF {
        panel: HoldingsPanel::new(n_assets, labels_q, labels, rows)?,
        kappa_ai,
        kappa_non_ai,
        target_ai,
        target_non_ai,
    })
}
