//! Observable proxies for algorithmic homogeneity from weight changes.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use model_core::seed::{stream, stream_rng};

use crate::error::{domain, AnalyticsError, Result};
use crate::panel::{quarter_labels, Group, GroupFilter, HoldingsPanel, SparseWeights};

fn members_for(panel: &HoldingsPanel, filter: GroupFilter) -> Result<Vec<usize>> {
    if filter == GroupFilter::Cross {
        return Err(domain("the cross filter selects pairs, not institutions"));
    }
    let m = panel.members(filter);
    if m.len() < 3 {
        return Err(domain(format!("{} institutions pass the filter, need 3", m.len())));
    }
    Ok(m)
}

/// Share of the variance of Δw (institution × institution covariance over
/// assets) carried by the first principal component.
pub fn rho_pca(panel: &HoldingsPanel, quarter: usize, filter: GroupFilter) -> Result<f64> {
    let members = members_for(panel, filter)?;
    let dw = panel.weight_changes(quarter, &members)?;
    let n = members.len();
    let m = panel.n_assets;
    if m < 2 {
        return Err(AnalyticsError::RankDeficient("fewer than 2 assets".into()));
    }
    let mut x = DMatrix::<f64>::zeros(n, m);
    for (i, row) in dw.iter().enumerate() {
        let mean = row.iter().sum::<f64>() / m as f64;
        for (a, v) in row.iter().enumerate() {
            x[(i, a)] = v - mean;
        }
    }
    let cov = &x * x.transpose() / (m as f64 - 1.0);
    let trace = cov.trace();
    if !(trace > 1e-300) {
        return Err(AnalyticsError::RankDeficient("no weight changes in quarter".into()));
    }
    let eig = cov.symmetric_eigen();
    let top = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((top / trace).clamp(0.0, 1.0))
}

/// Pairwise sign agreement of Δw minus one half. For each pair the match rate
/// is taken over assets where both changes are nonzero; pair rates are then
/// averaged. Pairs with no such asset are skipped.
pub fn rho_sync(panel: &HoldingsPanel, quarter: usize, filter: GroupFilter) -> Result<f64> {
    let members = members_for(panel, filter)?;
    let dw = panel.weight_changes(quarter, &members)?;
    let signs: Vec<Vec<i8>> = dw
        .iter()
        .map(|r| r.iter().map(|&v| if v > 0.0 { 1 } else if v < 0.0 { -1 } else { 0 }).collect())
        .collect();
    let partial: Vec<(f64, usize)> = (0..signs.len())
        .into_par_iter()
        .map(|i| {
            let mut acc = 0.0;
            let mut pairs = 0;
            for j in i + 1..signs.len() {
                let (mut valid, mut hits) = (0usize, 0usize);
                for (a, b) in signs[i].iter().zip(&signs[j]) {
                    if *a != 0 && *b != 0 {
                        valid += 1;
                        hits += (a == b) as usize;
                    }
                }
                if valid > 0 {
                    acc += hits as f64 / valid as f64;
                    pairs += 1;
                }
            }
            (acc, pairs)
        })
        .collect();
    let (sum, pairs) = partial.iter().fold((0.0, 0), |(s, n), &(a, k)| (s + a, n + k));
    if pairs == 0 {
        return Err(domain("no pair shares a nonzero weight change"));
    }
    Ok(sum / pairs as f64 - 0.5)
}

/// Two-quarter panel whose weight changes have common-factor share `rho`:
/// Δw_i = ε(√ρ·c + √(1−ρ)·e_i), demeaned so rows keep summing to one, on top
/// of equal weights. All institutions are labeled AI.
pub fn planted_homogeneity_panel(n_inst: usize, n_assets: usize, rho: f64, seed: u64) -> Result<HoldingsPanel> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(domain(format!("rho must lie in [0,1], got {rho}")));
    }
    if n_inst < 3 || n_assets < 2 {
        return Err(domain("need at least 3 institutions and 2 assets"));
    }
    let mut rng = stream_rng(seed, stream::RHO_PANEL, (rho * 1e6).round() as u64);
    let base = 1.0 / n_assets as f64;
    let eps = 0.15 * base;
    let c: Vec<f64> = (0..n_assets).map(|_| rng.sample(StandardNormal)).collect();
    let (sc, se) = (rho.sqrt(), (1.0 - rho).sqrt());
    let mut q0 = Vec::with_capacity(n_inst);
    let mut q1 = Vec::with_capacity(n_inst);
    for _ in 0..n_inst {
        let mut d: Vec<f64> = c
            .iter()
            .map(|&ck| {
                let e: f64 = rng.sample(StandardNormal);
                eps * (sc * ck + se * e)
            })
            .collect();
        let mean = d.iter().sum::<f64>() / n_assets as f64;
        d.iter_mut().for_each(|x| *x -= mean);
        let mut w: Vec<f64> = d.iter().map(|x| (base + x).max(0.0)).collect();
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= s);
        q0.push(SparseWeights::from_dense(&vec![base; n_assets]));
        q1.push(SparseWeights::from_dense(&w));
    }
    let mut rows = q0;
    rows.extend(q1);
    HoldingsPanel::new(n_assets, quarter_labels("2000Q1", 2)?, vec![Group::Ai; n_inst], rows)
}
