//! Monte Carlo welfare: price-discovery accuracy and tail stability.

use std::io::Write;

use market_sim::{run_market_with, MarketConfig};
use model_core::seed::{derive_seed, stream};
use model_core::ModelParams;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equilibrium::{find_equilibria, EquilibriumSet};
use crate::error::{GameError, Result};

const TAIL: f64 = 0.01;
const MIN_TAIL: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WelfareSim {
    pub params: ModelParams,
    #[serde(default)]
    pub market: MarketConfig,
    pub ticks: usize,
    pub burn_in: usize,
}

impl WelfareSim {
    pub fn baseline() -> Self {
        WelfareSim {
            params: ModelParams::baseline(),
            market: MarketConfig::default(),
            ticks: 3000,
            burn_in: 300,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.burn_in >= self.ticks {
            return Err(GameError::Domain("burn_in must be shorter than ticks".into()));
        }
        Ok(())
    }

    /// Pricing errors p − v after burn-in, one vector per replication.
    /// Replication r uses the same seed at every φ.
    fn errors(&self, phi: f64, reps: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        self.validate()?;
        let mut p = self.params.clone();
        p.phi = phi;
        (0..reps)
            .map(|r| {
                let path = run_market_with(&p, &self.market, self.ticks, derive_seed(seed, stream::WELFARE, r as u64))?;
                Ok(path.pricing_errors()[self.burn_in..].to_vec())
            })
            .collect()
    }
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (m, 0.0);
    }
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

fn cte(abs_sorted_desc: &[f64]) -> f64 {
    let n = ((abs_sorted_desc.len() as f64) * TAIL).ceil() as usize;
    abs_sorted_desc[..n].iter().sum::<f64>() / n as f64
}

fn sorted_abs(xs: &[f64]) -> Vec<f64> {
    let mut a: Vec<f64> = xs.iter().map(|x| x.abs()).collect();
    a.sort_by(|x, y| y.total_cmp(x));
    a
}

fn eff_from(errs: &[Vec<f64>]) -> (f64, f64) {
    let per: Vec<f64> = errs
        .iter()
        .map(|e| e.iter().map(|x| x * x).sum::<f64>() / e.len() as f64)
        .collect();
    let (m, se) = mean_se(&per);
    (-m, se)
}

fn stab_from(errs: &[Vec<f64>]) -> Result<(f64, f64)> {
    let total: usize = errs.iter().map(|e| e.len()).sum();
    let got = ((total as f64) * TAIL).ceil() as usize;
    if got < MIN_TAIL {
        return Err(GameError::ThinTail { got, need: MIN_TAIL });
    }
    let pooled = sorted_abs(&errs.concat());
    let per: Vec<f64> = errs.iter().filter(|e| !e.is_empty()).map(|e| cte(&sorted_abs(e))).collect();
    let (_, se) = mean_se(&per);
    Ok((-cte(&pooled), se))
}

/// −E[(p − v)²] with its Monte Carlo standard error across replications.
pub fn welfare_eff(phi: f64, sim: &WelfareSim, replications: usize, seed: u64) -> Result<(f64, f64)> {
    if replications < 10 {
        return Err(GameError::Domain("replications must be >= 10".into()));
    }
    Ok(eff_from(&sim.errors(phi, replications, seed)?))
}

/// −CTE_0.01(|p − v|) over pooled ticks.
pub fn welfare_stab(phi: f64, sim: &WelfareSim, replications: usize, seed: u64) -> Result<(f64, f64)> {
    if replications < 1 {
        return Err(GameError::Domain("replications must be >= 1".into()));
    }
    stab_from(&sim.errors(phi, replications, seed)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WelfareCurve {
    pub grid: Vec<f64>,
    pub w_eff: Vec<f64>,
    pub w_eff_se: Vec<f64>,
    pub w_stab: Vec<f64>,
    pub w_stab_se: Vec<f64>,
    pub w_social: Vec<f64>,
    pub weight: f64,
    pub phi_eff_star: f64,
    pub phi_stab_star: f64,
    pub phi_social: f64,
}

impl WelfareCurve {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["phi", "w_eff", "w_eff_se", "w_stab", "w_stab_se", "w_social"])?;
        for i in 0..self.grid.len() {
            out.write_record([
                format!("{}", self.grid[i]),
                format!("{:e}", self.w_eff[i]),
                format!("{:e}", self.w_eff_se[i]),
                format!("{:e}", self.w_stab[i]),
                format!("{:e}", self.w_stab_se[i]),
                format!("{:e}", self.w_social[i]),
            ])?;
        }
        out.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

fn argmax(grid: &[f64], ys: &[f64]) -> f64 {
    let mut best = 0;
    for i in 1..ys.len() {
        if ys[i] > ys[best] {
            best = i;
        }
    }
    grid[best]
}

/// Both welfare curves on `grid` with common random numbers, and their optima.
/// The social objective is weight·w_eff + (1 − weight)·w_stab.
pub fn optimal_phis(sim: &WelfareSim, grid: &[f64], replications: usize, weight: f64, seed: u64) -> Result<WelfareCurve> {
    if grid.len() < 11 {
        return Err(GameError::Domain("grid needs at least 11 points".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) || grid.iter().any(|g| !(0.0..=1.0).contains(g)) {
        return Err(GameError::Domain("grid must be strictly increasing within [0,1]".into()));
    }
    if !(0.0..=1.0).contains(&weight) {
        return Err(GameError::Domain("weight must lie in [0,1]".into()));
    }
    if replications < 10 {
        return Err(GameError::Domain("replications must be >= 10".into()));
    }
    let stats = grid
        .par_iter()
        .map(|&phi| {
            let errs = sim.errors(phi, replications, seed)?;
            Ok((eff_from(&errs), stab_from(&errs)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let w_eff: Vec<f64> = stats.iter().map(|s| s.0 .0).collect();
    let w_stab: Vec<f64> = stats.iter().map(|s| s.1 .0).collect();
    let w_social: Vec<f64> = w_eff.iter().zip(&w_stab).map(|(e, s)| weight * e + (1.0 - weight) * s).collect();
    Ok(WelfareCurve {
        grid: grid.to_vec(),
        phi_eff_star: argmax(grid, &w_eff),
        phi_stab_star: argmax(grid, &w_stab),
        phi_social: argmax(grid, &w_social),
        w_eff_se: stats.iter().map(|s| s.0 .1).collect(),
        w_stab_se: stats.iter().map(|s| s.1 .1).collect(),
        w_eff,
        w_stab,
        w_social,
        weight,
    })
}

/// Highest stable equilibrium minus φ_social.
pub fn overinvestment_wedge_from(curve: &WelfareCurve, eqs: &EquilibriumSet) -> Result<f64> {
    let top = eqs
        .highest_stable()
        .ok_or_else(|| GameError::Domain("no stable equilibrium".into()))?;
    Ok(top.phi_star - curve.phi_social)
}

pub fn overinvestment_wedge(sim: &WelfareSim, grid: &[f64], replications: usize, weight: f64, seed: u64) -> Result<f64> {
    let curve = optimal_phis(sim, grid, replications, weight, seed)?;
    let eqs = find_equilibria(&sim.params, 1000, 1e-10)?;
    overinvestment_wedge_from(&curve, &eqs)
}
