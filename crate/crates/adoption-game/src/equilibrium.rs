use model_core::{CostDistribution, ModelParams};
use serde::{Deserialize, Serialize};

use crate::error::{GameError, Result};
use crate::incentive::{alpha_advantage, best_response_share};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EquilibriumKind {
    Diversified,
    Tipping,
    RedQueen,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumPoint {
    pub phi_star: f64,
    pub stable: bool,
    pub kind: EquilibriumKind,
    pub residual: f64,
    /// d/dφ of G(ΔΠ(φ)) − φ at the root.
    pub slope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSet {
    pub points: Vec<EquilibriumPoint>,
    pub params: ModelParams,
}

impl EquilibriumSet {
    pub fn highest_stable(&self) -> Option<&EquilibriumPoint> {
        self.points.iter().rev().find(|p| p.stable)
    }
}

/// γ = 9.5 with lognormal(1.0, 0.9) costs on the baseline market: three
/// interior fixed points near 0.14, 0.26 and 0.87.
pub fn multi_equilibrium_fixture() -> ModelParams {
    let mut p = ModelParams::baseline();
    p.gamma = 9.5;
    p.d_bench = 0.0;
    p.cost_dist = CostDistribution::Lognormal { mu: 1.0, sigma: 0.9 };
    p
}

fn excess(phi: f64, params: &ModelParams) -> Result<f64> {
    Ok(best_response_share(phi, params)? - phi)
}

fn slope_at(phi: f64, params: &ModelParams) -> Result<f64> {
    let h = 1e-6;
    let lo = (phi - h).max(0.0);
    let hi = (phi + h).min(1.0);
    Ok((excess(hi, params)? - excess(lo, params)?) / (hi - lo))
}

fn bisect(mut lo: f64, mut hi: f64, params: &ModelParams, tol: f64) -> Result<f64> {
    let mut r_lo = excess(lo, params)?;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let r = excess(mid, params)?;
        if r == 0.0 || (hi - lo) < 1e-16 || (r.abs() <= tol * 1e-3 && hi - lo < tol) {
            return Ok(mid);
        }
        if (r > 0.0) == (r_lo > 0.0) {
            lo = mid;
            r_lo = r;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Grid scan of r(φ) = G(ΔΠ(φ)) − φ followed by bisection of each sign change.
pub fn find_equilibria(params: &ModelParams, grid_size: usize, tol: f64) -> Result<EquilibriumSet> {
    if grid_size < 100 {
        return Err(GameError::Domain("grid_size must be >= 100".into()));
    }
    if !(tol > 0.0) {
        return Err(GameError::Domain("tol must be > 0".into()));
    }
    params.validate()?;
    let xs: Vec<f64> = (0..=grid_size).map(|i| i as f64 / grid_size as f64).collect();
    let rs = xs.iter().map(|&x| excess(x, params)).collect::<Result<Vec<_>>>()?;

    let mut roots = Vec::new();
    if rs[0].abs() <= tol {
        roots.push(0.0);
    }
    for i in 0..grid_size {
        let (a, b) = (rs[i], rs[i + 1]);
        if i + 1 == grid_size && b.abs() <= tol {
            continue;
        }
        if (a > 0.0 && b < 0.0) || (a < 0.0 && b > 0.0) {
            roots.push(bisect(xs[i], xs[i + 1], params, tol)?);
        } else if b == 0.0 && i + 1 < grid_size {
            roots.push(xs[i + 1]);
        }
    }
    if rs[grid_size].abs() <= tol {
        roots.push(1.0);
    }

    let mut points = Vec::with_capacity(roots.len());
    for phi in roots {
        let residual = excess(phi, params)?.abs();
        let slope = slope_at(phi, params)?;
        points.push(EquilibriumPoint {
            phi_star: phi,
            stable: slope < 0.0,
            kind: EquilibriumKind::Diversified,
            residual,
            slope,
        });
    }
    let top = points.iter().rposition(|p| p.stable && p.phi_star > 0.0);
    for (i, p) in points.iter_mut().enumerate() {
        p.kind = if !p.stable {
            EquilibriumKind::Tipping
        } else if Some(i) == top {
            EquilibriumKind::RedQueen
        } else {
            EquilibriumKind::Diversified
        };
    }
    Ok(EquilibriumSet {
        points,
        params: params.clone(),
    })
}

/// Iterates φ ← G(ΔΠ(φ)).
pub fn tatonnement(params: &ModelParams, start: f64, iterations: usize) -> Result<Vec<f64>> {
    let mut path = Vec::with_capacity(iterations + 1);
    let mut phi = start.clamp(0.0, 1.0);
    path.push(phi);
    for _ in 0..iterations {
        phi = best_response_share(phi, params)?;
        path.push(phi);
    }
    Ok(path)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RedQueenVerdict {
    RedQueen,
    NotRedQueen,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RedQueenReport {
    pub phi_star: f64,
    /// advantage + γ(φ − d) at φ*.
    pub marginal_gross: f64,
    /// G⁻¹(φ*).
    pub marginal_cost: f64,
    pub marginal_net: f64,
    pub positive_adoption: bool,
    pub deviations_unprofitable: bool,
    /// N·[φ*·advantage − E(c; c ≤ c_m)] summed over adopters.
    pub aggregate_net_alpha: f64,
    pub verdict: RedQueenVerdict,
}

const PERTURBATIONS: [f64; 3] = [0.005, 0.01, 0.02];

/// Checks the zero-marginal-net-alpha and no-profitable-deviation conditions.
pub fn red_queen_check(eq: &EquilibriumPoint, params: &ModelParams, tol: f64) -> Result<RedQueenReport> {
    let phi = eq.phi_star;
    let adv = alpha_advantage(phi, params)?;
    let marginal_gross = adv + params.gamma * (phi - params.d_bench);
    let positive_adoption = phi > 0.0;
    let marginal_cost = if positive_adoption { params.cost_dist.quantile(phi) } else { 0.0 };
    let marginal_net = marginal_gross - marginal_cost;

    // Entry above φ* must not pay for the marginal entrant and exit below must not pay either.
    let mut deviations_unprofitable = true;
    for eps in PERTURBATIONS {
        if phi + eps <= 1.0 && excess(phi + eps, params)? >= 0.0 {
            deviations_unprofitable = false;
        }
        if phi - eps >= 0.0 && excess(phi - eps, params)? <= 0.0 {
            deviations_unprofitable = false;
        }
    }
    let cost_mass = if positive_adoption {
        params.cost_dist.partial_expectation(marginal_cost)
    } else {
        0.0
    };
    let aggregate_net_alpha = params.n() * (phi * adv - cost_mass);
    let ok = positive_adoption && eq.stable && marginal_net.abs() <= tol && deviations_unprofitable;
    Ok(RedQueenReport {
        phi_star: phi,
        marginal_gross,
        marginal_cost,
        marginal_net,
        positive_adoption,
        deviations_unprofitable,
        aggregate_net_alpha,
        verdict: if ok { RedQueenVerdict::RedQueen } else { RedQueenVerdict::NotRedQueen },
    })
}
