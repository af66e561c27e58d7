//! Scenario configuration: TOML with strict keys, merged over the baseline.

use std::path::Path;

use adoption_game::multi_equilibrium_fixture;
use analytics::{AlphaUnitMap, ConvergenceTargets, FundPanelConfig};
use market_sim::{CrashConfig, MarketConfig};
use model_core::ModelParams;
use serde::{Deserialize, Serialize};
use signal_dynamics::{CascadeConfig, PhiSchedule};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HalflifeSection {
    pub grid_points: usize,
    pub rhos: Vec<f64>,
    pub reference_pre: f64,
    pub reference_current: f64,
}

impl Default for HalflifeSection {
    fn default() -> Self {
        HalflifeSection {
            grid_points: 101,
            rhos: vec![0.0, 0.2, 0.4, 0.6, 0.8],
            reference_pre: 58.0,
            reference_current: 18.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ParamSource {
    /// The built-in fixture for the subcommand.
    Fixture,
    /// The scenario's `params`.
    Params,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CascadeSection {
    pub source: ParamSource,
    /// Overrides the fixture ramp when set.
    pub schedule: Option<PhiSchedule>,
    pub epochs: usize,
    pub engine: CascadeConfig,
}

impl Default for CascadeSection {
    fn default() -> Self {
        CascadeSection {
            source: ParamSource::Fixture,
            schedule: None,
            epochs: signal_dynamics::FIXTURE_EPOCHS,
            engine: CascadeConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MarketSection {
    pub ticks: usize,
    pub engine: MarketConfig,
}

impl Default for MarketSection {
    fn default() -> Self {
        MarketSection {
            ticks: 5000,
            engine: MarketConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CrashSection {
    pub runs: usize,
    pub engine: CrashConfig,
}

impl Default for CrashSection {
    /// Baseline: homogeneity held at 0.5 through the shock.
    fn default() -> Self {
        CrashSection {
            runs: 100,
            engine: CrashConfig {
                calm_rho: 0.5,
                stress_rho: 0.5,
                ..CrashConfig::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EquilibriumSection {
    pub source: ParamSource,
    pub grid_size: usize,
    pub tol: f64,
    pub red_queen_tol: f64,
    pub curve_points: usize,
}

impl Default for EquilibriumSection {
    fn default() -> Self {
        EquilibriumSection {
            source: ParamSource::Fixture,
            grid_size: 1000,
            tol: 1e-10,
            red_queen_tol: 1e-6,
            curve_points: 201,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WelfareSection {
    pub grid_points: usize,
    pub replications: usize,
    pub ticks: usize,
    pub burn_in: usize,
    pub weight: f64,
    pub engine: MarketConfig,
}

impl Default for WelfareSection {
    fn default() -> Self {
        WelfareSection {
            grid_points: 21,
            replications: 50,
            ticks: 3000,
            burn_in: 300,
            weight: 0.5,
            engine: MarketConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThirteenfSection {
    pub institutions: usize,
    pub assets: usize,
    pub quarters: usize,
    pub targets: ConvergenceTargets,
    /// Also write the panel as long CSV and binary cache.
    pub write_panel: bool,
}

impl Default for ThirteenfSection {
    fn default() -> Self {
        ThirteenfSection {
            institutions: 200,
            assets: 500,
            quarters: 48,
            targets: ConvergenceTargets::default(),
            write_panel: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DispersionSection {
    pub n_ai: usize,
    pub n_human: usize,
    pub months: usize,
    pub phi_start: f64,
    pub phi_end: f64,
    pub ai_dispersion_start: f64,
    pub human_dispersion_start: f64,
    pub human_signal_ratio: f64,
    pub market_mean: f64,
    pub market_sd: f64,
    pub window: usize,
    /// Adoption levels whose simulated alpha decay is fitted for half-lives.
    pub vintages: Vec<f64>,
    pub vintage_months: usize,
    pub vintage_replications: usize,
}

impl Default for DispersionSection {
    fn default() -> Self {
        let f = FundPanelConfig::default();
        DispersionSection {
            n_ai: f.n_ai,
            n_human: f.n_human,
            months: f.months,
            phi_start: f.phi_start,
            phi_end: f.phi_end,
            ai_dispersion_start: f.ai_dispersion_start,
            human_dispersion_start: f.human_dispersion_start,
            human_signal_ratio: f.human_signal_ratio,
            market_mean: f.market_mean,
            market_sd: f.market_sd,
            window: f.window,
            vintages: vec![0.0, 0.4, 0.7],
            vintage_months: 60,
            vintage_replications: 100,
        }
    }
}

impl DispersionSection {
    pub fn fund_config(&self, params: &ModelParams, alpha_units: Option<AlphaUnitMap>) -> FundPanelConfig {
        FundPanelConfig {
            params: params.clone(),
            n_ai: self.n_ai,
            n_human: self.n_human,
            months: self.months,
            phi_start: self.phi_start,
            phi_end: self.phi_end,
            ai_dispersion_start: self.ai_dispersion_start,
            human_dispersion_start: self.human_dispersion_start,
            human_signal_ratio: self.human_signal_ratio,
            market_mean: self.market_mean,
            market_sd: self.market_sd,
            window: self.window,
            alpha_units,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensitivityParam {
    Phi,
    Rho,
    Beta,
    NInstitutions,
    KSignals,
    Theta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensitivitySection {
    pub points: usize,
    pub panels: Vec<SensitivityParam>,
}

impl Default for SensitivitySection {
    fn default() -> Self {
        SensitivitySection {
            points: 41,
            panels: vec![
                SensitivityParam::Phi,
                SensitivityParam::Rho,
                SensitivityParam::Beta,
                SensitivityParam::NInstitutions,
                SensitivityParam::KSignals,
                SensitivityParam::Theta,
            ],
        }
    }
}

/// Fully resolved scenario. `params` is complete after loading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: String,
    pub seed: u64,
    pub alpha_units: Option<AlphaUnitMap>,
    pub params: ModelParams,
    pub halflife: HalflifeSection,
    pub cascade: CascadeSection,
    pub market: MarketSection,
    pub crash: CrashSection,
    pub equilibrium: EquilibriumSection,
    pub welfare: WelfareSection,
    pub thirteenf: ThirteenfSection,
    pub dispersion: DispersionSection,
    pub sensitivity: SensitivitySection,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            scenario: "baseline".into(),
            seed: 20240101,
            alpha_units: None,
            params: ModelParams::baseline(),
            halflife: HalflifeSection::default(),
            cascade: CascadeSection::default(),
            market: MarketSection::default(),
            crash: CrashSection::default(),
            equilibrium: EquilibriumSection::default(),
            welfare: WelfareSection::default(),
            thirteenf: ThirteenfSection::default(),
            dispersion: DispersionSection::default(),
            sensitivity: SensitivitySection::default(),
        }
    }
}

/// Recursively overlays `over` onto `base`. Arrays and scalars replace, and
/// so does a tagged table whose `kind` changes.
fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) if o.get("kind").is_none_or(|x| Some(x) == b.get("kind")) => {
                merge(b, o)
            }
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

impl ScenarioConfig {
    /// Parses TOML text. Every key present overrides the default scenario;
    /// unknown keys anywhere are errors.
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let over: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        let mut base = toml::Table::try_from(ScenarioConfig::default())
            .map_err(|e| ConfigError::Parse(format!("default config does not serialize: {e}")))?;
        merge(&mut base, over);
        let cfg: ScenarioConfig = base.try_into().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        ScenarioConfig::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario config serializes")
    }

    /// Sets every replication-style count at once.
    pub fn set_replications(&mut self, n: usize) {
        self.crash.runs = n;
        self.welfare.replications = n;
        self.dispersion.vintage_replications = n;
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.params.validate().map_err(|e| invalid(format!("params: {e}")))?;
        let h = &self.halflife;
        if h.grid_points < 3 {
            return Err(invalid("halflife.grid_points must be >= 3"));
        }
        if h.rhos.is_empty() || h.rhos.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(invalid("halflife.rhos must be nonempty values in [0,1]"));
        }
        if self.cascade.epochs < 1 {
            return Err(invalid("cascade.epochs must be >= 1"));
        }
        if let Some(s) = &self.cascade.schedule {
            s.validate().map_err(|e| invalid(format!("cascade.schedule: {e}")))?;
        }
        if self.market.ticks < 30 {
            return Err(invalid("market.ticks must be >= 30"));
        }
        self.market
            .engine
            .validate(self.params.k_signals())
            .map_err(|e| invalid(format!("market.engine: {e}")))?;
        if self.crash.runs < 1 {
            return Err(invalid("crash.runs must be >= 1"));
        }
        let e = &self.equilibrium;
        if e.grid_size < 100 || !(e.tol > 0.0) || !(e.red_queen_tol > 0.0) || e.curve_points < 2 {
            return Err(invalid("equilibrium: need grid_size >= 100, positive tolerances, curve_points >= 2"));
        }
        let w = &self.welfare;
        if w.grid_points < 11 || w.replications < 10 || w.burn_in >= w.ticks || !(0.0..=1.0).contains(&w.weight) {
            return Err(invalid(
                "welfare: need grid_points >= 11, replications >= 10, burn_in < ticks, weight in [0,1]",
            ));
        }
        let t = &self.thirteenf;
        t.targets.validate().map_err(|e| invalid(format!("thirteenf.targets: {e}")))?;
        if t.institutions < 4 || t.assets < t.targets.holdings {
            return Err(invalid("thirteenf: need >= 4 institutions and assets >= holdings"));
        }
        t.targets
            .target_paths(t.quarters)
            .map_err(|e| invalid(format!("thirteenf: {e}")))?;
        let d = &self.dispersion;
        d.fund_config(&self.params, self.alpha_units)
            .validate()
            .map_err(|e| invalid(format!("dispersion: {e}")))?;
        if d.vintages.iter().any(|p| !(0.0..=1.0).contains(p)) || d.vintage_months < 12 || d.vintage_replications < 1 {
            return Err(invalid("dispersion: vintages in [0,1], vintage_months >= 12, vintage_replications >= 1"));
        }
        if self.sensitivity.points < 2 {
            return Err(invalid("sensitivity.points must be >= 2"));
        }
        Ok(())
    }

    /// Parameters for the equilibrium command.
    pub fn equilibrium_params(&self) -> ModelParams {
        match self.equilibrium.source {
            ParamSource::Fixture => multi_equilibrium_fixture(),
            ParamSource::Params => self.params.clone(),
        }
    }
}
