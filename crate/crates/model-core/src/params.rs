use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{ModelError, Result};

/// One tradeable signal. Rates are per month.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalSpec {
    pub theta: f64,
    pub sigma0_sq: f64,
    pub rho: f64,
    pub a: f64,
    /// Regeneration per retraining epoch.
    #[serde(default = "default_g")]
    pub g: f64,
    #[serde(default = "default_beta_cf")]
    pub beta_cf: f64,
}

fn default_g() -> f64 {
    0.02
}

fn default_beta_cf() -> f64 {
    1.0
}

impl SignalSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = self.theta > 0.0
            && self.sigma0_sq > 0.0
            && (0.0..=1.0).contains(&self.rho)
            && self.a > 0.0
            && self.g >= 0.0
            && self.beta_cf >= 0.0
            && [self.theta, self.sigma0_sq, self.a, self.g, self.beta_cf]
                .iter()
                .all(|x| x.is_finite());
        if ok {
            Ok(())
        } else {
            Err(ModelError::Invalid(format!("signal spec out of range: {self:?}")))
        }
    }

    pub fn sigma0(&self) -> f64 {
        self.sigma0_sq.sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum LambdaRegime {
    Decreasing,
    Constant,
    Increasing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketParams {
    pub sigma_v: f64,
    pub sigma_u: f64,
    pub sigma_eta: f64,
    pub sigma_nu: f64,
    pub sigma_h: f64,
    pub sigma_eps: f64,
    pub lambda_regime: LambdaRegime,
    pub lambda0: f64,
    #[serde(default)]
    pub lambda_slope: f64,
    #[serde(default = "default_lambda_prime")]
    pub lambda_prime: f64,
}

/// λ′ solving M(0.7, 0.5, 0.2) = 1.3.
pub const DEFAULT_LAMBDA_PRIME: f64 = 0.7 * 0.5 * 0.2 * 1.3 / 0.3;

fn default_lambda_prime() -> f64 {
    DEFAULT_LAMBDA_PRIME
}

impl MarketParams {
    pub fn validate(&self) -> Result<()> {
        let vols = [self.sigma_eta, self.sigma_nu, self.sigma_h, self.sigma_eps];
        // σ_u = 0 is only meaningful when λ does not depend on it.
        let su_ok = match self.lambda_regime {
            LambdaRegime::Decreasing => self.sigma_u > 0.0,
            _ => self.sigma_u >= 0.0,
        };
        let ok = self.sigma_v > 0.0
            && su_ok
            && vols.iter().all(|v| *v >= 0.0 && v.is_finite())
            && self.lambda0 > 0.0
            && self.lambda_slope >= 0.0
            && self.lambda_prime > 0.0
            && self.sigma_v.is_finite()
            && self.sigma_u.is_finite();
        if ok {
            Ok(())
        } else {
            Err(ModelError::Invalid(format!("market params out of range: {self:?}")))
        }
    }
}

/// Adoption-cost distribution G(c).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "UPPERCASE", deny_unknown_fields)]
pub enum CostDistribution {
    Uniform { lo: f64, hi: f64 },
    Lognormal { mu: f64, sigma: f64 },
}

impl CostDistribution {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            CostDistribution::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo < hi,
            CostDistribution::Lognormal { mu, sigma } => mu.is_finite() && sigma.is_finite() && sigma > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(ModelError::Invalid(format!("cost distribution: {self:?}")))
        }
    }

    pub fn cdf(&self, c: f64) -> f64 {
        match *self {
            CostDistribution::Uniform { lo, hi } => ((c - lo) / (hi - lo)).clamp(0.0, 1.0),
            CostDistribution::Lognormal { mu, sigma } => {
                if c <= 0.0 {
                    0.0
                } else {
                    std_normal().cdf((c.ln() - mu) / sigma)
                }
            }
        }
    }

    /// G⁻¹(q) for q in (0,1).
    pub fn quantile(&self, q: f64) -> f64 {
        let q = q.clamp(1e-15, 1.0 - 1e-15);
        match *self {
            CostDistribution::Uniform { lo, hi } => lo + q * (hi - lo),
            CostDistribution::Lognormal { mu, sigma } => (mu + sigma * std_normal().inverse_cdf(q)).exp(),
        }
    }

    /// E[c; c ≤ x] = ∫ c dG over (−∞, x].
    pub fn partial_expectation(&self, x: f64) -> f64 {
        match *self {
            CostDistribution::Uniform { lo, hi } => {
                let x = x.clamp(lo, hi);
                (x * x - lo * lo) / (2.0 * (hi - lo))
            }
            CostDistribution::Lognormal { mu, sigma } => {
                if x <= 0.0 {
                    0.0
                } else {
                    (mu + 0.5 * sigma * sigma).exp() * std_normal().cdf((x.ln() - mu - sigma * sigma) / sigma)
                }
            }
        }
    }

    pub fn median(&self) -> f64 {
        self.quantile(0.5)
    }
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal")
}

/// Full parameterization of the three layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub n_institutions: usize,
    pub phi: f64,
    pub signals: Vec<SignalSpec>,
    pub market: MarketParams,
    pub kappa: f64,
    pub i_max: f64,
    /// Performative feedback intensity; overrides 2ω(1−ω) when set explicitly.
    pub beta: f64,
    pub gamma: f64,
    pub d_bench: f64,
    /// Optional per-institution benchmarks; the game uses `d_bench`.
    #[serde(default)]
    pub d_bench_individual: Option<Vec<f64>>,
    pub cost_dist: CostDistribution,
    pub tau_risk: f64,
    /// α₀; `None` means the human alpha at φ=0 implied by the precision ratio.
    #[serde(default)]
    pub alpha_h0: Option<f64>,
}

impl ModelParams {
    pub fn k_signals(&self) -> usize {
        self.signals.len()
    }

    pub fn n(&self) -> f64 {
        self.n_institutions as f64
    }

    /// Unweighted mean homogeneity.
    pub fn rho_bar(&self) -> f64 {
        if self.signals.is_empty() {
            return 0.0;
        }
        self.signals.iter().map(|s| s.rho).sum::<f64>() / self.signals.len() as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_institutions < 2 {
            return Err(ModelError::Invalid("n_institutions must be >= 2".into()));
        }
        if !(0.0..=1.0).contains(&self.phi) {
            return Err(ModelError::Invalid(format!("phi={} outside [0,1]", self.phi)));
        }
        if !(self.kappa >= 1.0 && self.kappa.is_finite()) {
            return Err(ModelError::Invalid(format!("kappa={} must be >= 1", self.kappa)));
        }
        if !(self.i_max > 0.0 && self.i_max.is_finite()) {
            return Err(ModelError::Invalid("i_max must be > 0".into()));
        }
        if !(0.0..1.0).contains(&self.beta) {
            return Err(ModelError::Invalid(format!("beta={} outside [0,1)", self.beta)));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(ModelError::Invalid("gamma must be >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.d_bench) {
            return Err(ModelError::Invalid("d_bench outside [0,1]".into()));
        }
        if let Some(ds) = &self.d_bench_individual {
            if ds.len() != self.n_institutions || ds.iter().any(|d| !(0.0..=1.0).contains(d)) {
                return Err(ModelError::Invalid(
                    "d_bench_individual needs one value in [0,1] per institution".into(),
                ));
            }
        }
        if !(self.tau_risk > 0.0 && self.tau_risk.is_finite()) {
            return Err(ModelError::Invalid("tau_risk must be > 0".into()));
        }
        if let Some(a0) = self.alpha_h0 {
            if !(a0 >= 0.0 && a0.is_finite()) {
                return Err(ModelError::Invalid("alpha_h0 must be >= 0".into()));
            }
        }
        self.cost_dist.validate()?;
        self.market.validate()?;
        for s in &self.signals {
            s.validate()?;
        }
        Ok(())
    }

    /// Calibrated reference configuration.
    ///
    /// Five identical signals with θ = 0.012 and ρ = 0.6. The aggressiveness
    /// is solved so that at φ = 0.7 the half-life is 17.96 months.
    pub fn baseline() -> Self {
        let market = MarketParams {
            sigma_v: 4.0,
            sigma_u: 0.6,
            sigma_eta: 1.8,
            sigma_nu: 2.0,
            sigma_h: 4.0,
            sigma_eps: 0.6,
            lambda_regime: LambdaRegime::Decreasing,
            lambda0: 4.0 / (2.0 * 0.6),
            lambda_slope: 0.5,
            lambda_prime: DEFAULT_LAMBDA_PRIME,
        };
        let template = SignalSpec {
            theta: BASELINE_THETA,
            sigma0_sq: 0.08,
            rho: 0.6,
            a: 1.0,
            g: 0.02,
            beta_cf: 1.0,
        };
        let mut p = ModelParams {
            n_institutions: 100,
            phi: 0.7,
            signals: vec![template; 5],
            market,
            kappa: 1.0,
            i_max: 10.0,
            beta: 0.25,
            gamma: 9.5,
            d_bench: 0.0,
            d_bench_individual: None,
            cost_dist: CostDistribution::Lognormal { mu: 1.0, sigma: 0.9 },
            tau_risk: 0.1,
            alpha_h0: None,
        };
        let delta = crate::closed::calibration_delta(
            crate::closed::half_life(BASELINE_THETA).expect("theta > 0"),
            BASELINE_HALF_LIFE,
            BASELINE_THETA,
        )
        .expect("valid half-lives");
        p.calibrate_aggressiveness(delta).expect("baseline calibrates");
        p
    }

    /// Rescale every a_k so that δ_k(φ) equals `target_delta` at the current φ.
    pub fn calibrate_aggressiveness(&mut self, target_delta: f64) -> Result<()> {
        let lam = crate::closed::kyle_lambda(&self.market, self.phi, self.rho_bar())?;
        let n = self.n();
        for s in &mut self.signals {
            s.a = crate::closed::aggressiveness_for_delta(target_delta, self.phi, n, s.rho, lam)?;
        }
        Ok(())
    }
}

pub const BASELINE_THETA: f64 = 0.012;
/// Current-regime half-life in months.
pub const BASELINE_HALF_LIFE: f64 = 17.96;
