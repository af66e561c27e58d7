//! One function per subcommand. Each writes its tables into an `OutputDir`.

use std::path::Path;

use adoption_game::{
    alpha_advantage, best_response_share, find_equilibria, optimal_phis, overinvestment_wedge_from, red_queen_check,
    WelfareSim,
};
use analytics::{
    convergence_series, estimate_half_life, generate_synthetic_13f_detailed, rho_pca, rho_sync, simulate_fund_panel,
    ConvergenceSeries, DispersionReport, GroupFilter,
};
use anyhow::Result;
use market_sim::{flash_crash_batch, retrain_regression, run_market_with, signal_return_series, MarketConfig, Tracking};
use model_core::seed::{derive_seed, stream};
use model_core::{attenuation_factor, decay_at, half_life, reflexive_multiplier, ModelParams};
use signal_dynamics::{cascade_simulate_schedule, heterogeneous_fixture, write_events_csv};

use crate::config::{ParamSource, ScenarioConfig, SensitivityParam};
use crate::output::{num, OutputDir};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    HalflifeSweep,
    Cascade,
    Market,
    Crash,
    Equilibrium,
    Welfare,
    Thirteenf,
    Dispersion,
    Sensitivity,
    ReportData,
}

impl Command {
    pub const ALL_DATA: [Command; 9] = [
        Command::HalflifeSweep,
        Command::Cascade,
        Command::Market,
        Command::Crash,
        Command::Equilibrium,
        Command::Welfare,
        Command::Thirteenf,
        Command::Dispersion,
        Command::Sensitivity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::HalflifeSweep => "halflife-sweep",
            Command::Cascade => "cascade",
            Command::Market => "market",
            Command::Crash => "crash",
            Command::Equilibrium => "equilibrium",
            Command::Welfare => "welfare",
            Command::Thirteenf => "thirteenf",
            Command::Dispersion => "dispersion",
            Command::Sensitivity => "sensitivity",
            Command::ReportData => "report-data",
        }
    }

    /// Runs into `dir`; report-data fans out into one subdirectory per command.
    pub fn run(self, cfg: &ScenarioConfig, dir: &Path) -> Result<()> {
        let out = OutputDir::create(dir, self.name(), cfg)?;
        out.write_snapshot(cfg)?;
        match self {
            Command::HalflifeSweep => cmd_halflife_sweep(cfg, &out),
            Command::Cascade => cmd_cascade(cfg, &out),
            Command::Market => cmd_market(cfg, &out),
            Command::Crash => cmd_crash(cfg, &out),
            Command::Equilibrium => cmd_equilibrium(cfg, &out),
            Command::Welfare => cmd_welfare(cfg, &out),
            Command::Thirteenf => cmd_thirteenf(cfg, &out),
            Command::Dispersion => cmd_dispersion(cfg, &out),
            Command::Sensitivity => cmd_sensitivity(cfg, &out),
            Command::ReportData => {
                for c in Command::ALL_DATA {
                    eprintln!("report-data: {}", c.name());
                    c.run(cfg, &dir.join(c.name()))?;
                }
                Ok(())
            }
        }
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn with_rho(params: &ModelParams, rho: f64) -> ModelParams {
    let mut p = params.clone();
    for s in &mut p.signals {
        s.rho = rho;
    }
    p
}

/// Mean half-life across signals at adoption `phi`.
fn mean_half_life(p: &ModelParams, phi: f64) -> Result<f64> {
    let mut acc = 0.0;
    for k in 0..p.k_signals() {
        acc += half_life(decay_at(p, k, phi)?.theta_eff)?;
    }
    Ok(acc / p.k_signals() as f64)
}

pub fn cmd_halflife_sweep(cfg: &ScenarioConfig, out: &OutputDir) -> Result<()> {
    let h = &cfg.halflife;
    let mut rows = Vec::new();
    for &rho in &h.rhos {
        let p = with_rho(&cfg.params, rho);
        for phi in linspace(0.0, 1.0, h.grid_points) {
            rows.push(vec![
                format!("{phi:.6}"),
                format!("{rho:.6}"),
                num(mean_half_life(&p, phi)?),
                num(h.reference_pre),
                num(h.reference_current),
            ]);
        }
    }
    out.table("halflife_sweep.csv", &["phi", "rho", "h", "ref_pre", "ref_current"], rows)?;
    Ok(())
}

pub fn cmd_cascade(cfg: &ScenarioConfig, out: &OutputDir) -> Result<()> {
    let c = &cfg.cascade;
    let (params, fixture_schedule) = match c.source {
        ParamSource::Fixture => heterogeneous_fixture(),
        ParamSource::Params => (
            cfg.params.clone(),
            signal_dynamics::PhiSchedule::Constant { phi: cfg.params.phi },
        ),
    };
    let schedule = c.schedule.clone().unwrap_or(fixture_schedule);
    let (trace, events) = cascade_simulate_schedule(&params, &schedule, c.epochs, cfg.seed, &c.engine)?;
    let mut buf = Vec::new();
    trace.write_csv(&mut buf)?;
    out.csv("cascade_trace.csv", buf)?;
    let mut buf = Vec::new();
    write_events_csv(&events, &mut buf)?;
    out.csv("cascade_events.csv", buf)?;
    let mut rows = Vec::new();
    for (n, e) in events.iter().enumerate() {
        for (k, (sig, post)) in e.post_thresholds.iter().enumerate() {
            let pre = e.pre_thresholds.get(k).map_or(f64::NAN, |x| x.1);
            rows.push(vec![n.to_string(), e.signal_index.to_string(), sig.to_string(), num(pre), num(*post)]);
        }
    }
    out.table(
        "cascade_thresholds.csv",
        &["event", "extinct_signal", "survivor", "threshold_before", "threshold_after"],
        rows,
    )?;
    eprintln!("cascade: {} extinction events over {} epochs", events.len(), c.epochs);
    Ok(())
}

pub fn cmd_market(cfg: &ScenarioConfig, out: &OutputDir) -> Result<()> {
    let m = &cfg.market;
    let engine = MarketConfig {
        tracking: Tracking::None,
        ..m.engine.clone()
    };
    let path = run_market_with(&cfg.params, &engine, m.ticks, cfg.seed)?;
    let mut buf = Vec::new();
    path.write_csv(&mut buf)?;
    out.csv("market_path.csv", buf)?;
    let mut rows = Vec::new();
    for k in 0..cfg.params.k_signals() {
        let r = retrain_regression(&path, k, m.ticks)?;
        let d = decay_at(&cfg.params, k, cfg.params.phi)?;
        rows.push(vec![
            k.to_string(),
            num(r.beta_hat),
            num(r.std_error),
            r.omega_implied.map_or_else(|| num(f64::NAN), num),
            num(attenuation_factor(cfg.params.signals[k].theta, d.delta)?),
            r.sample_size.to_string(),
        ]);
    }
    out.table(
        "market_retrain.csv",
        &["signal_index", "beta_hat", "std_error", "omega_implied", "omega_theory", "sample_size"],
        rows,
    )?;
    Ok(())
}

pub fn cmd_crash(cfg: &ScenarioConfig, out: &OutputDir) -> Result<()> {
    let c = &cfg.crash;
    let batch = flash_crash_batch(&cfg.params, &c.engine, c.runs, cfg.seed)?;
    let rows = batch.scenarios.iter().enumerate().map(|(i, s)| {
        vec![
            i.to_string(),
            num(s.shock_size),
            num(s.calm_rho),
            num(s.stress_rho),
            num(s.observed_decline),
            num(s.fundamental_decline),
            num(s.m_hat),
            s.unstable.to_string(),
        ]
    });
    out.table(
        "crash_runs.csv",
        &[
            "run",
            "shock",
            "calm_rho",
            "stress_rho",
            "observed_decline",
            "fundamental_decline",
            "m_hat",
            "unstable",
        ],
        rows.collect::<Vec<_>>(),
    )?;
    let theory = reflexive_multiplier(
        cfg.params.phi,
        c.engine.stress_rho,
        c.engine.feedback_beta,
        cfg.params.market.lambda_prime,
    )
    .unwrap_or(f64::INFINITY);
    out.table(
        "crash_summary.csv",
        &["runs", "calm_rho", "stress_rho", "m_hat", "m_hat_sd", "m_theory", "observed_decline", "fundamental_decline"],
        [vec![
            c.runs.to_string(),
            num(c.engine.calm_rho),
            num(c.engine.stress_rho),
            num(batch.mean_m_hat),
            num(batch.sd_m_hat),
            num(theory),
            num(batch.mean_observed),
            num(batch.mean_fundamental),
        ]],
    )?;
    eprintln!("crash: mean m_hat {:.4} over {} runs", batch.mean_m_hat, c.runs);
    Ok(())
}

pub fn cmd_equilibrium(cfg: &ScenarioConfig, out: &OutputDir) -> Result<()> {
    let e = &cfg.equilibrium;
    let params = cfg.equilibrium_params();
    let set = find_equilibria(&params, e.grid_size, e.tol)?;
    let rows = set.points.iter().map(|p| {
        vec![
            num(p.phi_star),
            p.stable.to_string(),
            serde_json::to_string(&p.kind).unwrap().trim_matches('"').to_string(),
            num(p.residual),
            num(p.slope),
        ]
    });
    out.table(
        "equilibria.csv",
        &["phi_star", "stable", "kind", "residual", "slope"],
        rows.collect::<Vec<_>>(),
    )?;
    let mut rq = Vec::new();
    for p in set.points.iter().filter(|p| p.stable) {
        let r = red_queen_check(p, &params, e.red_queen_tol)?;
        rq.push(vec![
            num(r.phi_star),
            num(r.marginal_gross),
            num(r.marginal_cost),
            num(r.marginal_net),
            r.positive_adoption.to_string(),
            r.deviations_unprofitable.to_string(),
            num(r.aggregate_net_alpha),
            serde_json::to_string(&r.verdict).unwrap().trim_matches('"').to_string(),
        ]);
    }
    out.table(
        "red_queen.csv",
        &[
            "phi_star",
            "marginal_gross",
            "marginal_cost",
            "marginal_net",
            "positive_adoption",
            "deviations_unprofitable",
            "aggregate_net_alpha",
            "verdict",
        ],
        rq,
    )?;
    let mut curve = Vec::new();
    for phi in linspace(0.0, 1.0, e.curve_points) {
        curve.push(vec![
            format!("{phi:.6}"),
            num(best_response_share(phi, &params)?),
            num(alpha_advantage(phi, &params)?),
        ]);
    }
    out.table("best_response.csv", &["phi", "best_response", "alpha_advantage"], curve)?;
    Ok(())
}

pub fn cmd_welfare(cfg: &ScenarioConfig, out: &OutputDir) -> Result<()> {
    let w = &cfg.welfare;
    let sim = WelfareSim {
        params: cfg.params.clone(),
        market: w.engine.clone(),
        ticks: w.ticks,
        burn_in: w.burn_in,
    };
    let grid = linspace(0.0, 1.0, w.grid_points);
    let curve = optimal_phis(&sim, &grid, w.replications, w.weight, cfg.seed)?;
    let mut buf = Vec::new();
    curve.write_csv(&mut buf)?;
    out.csv("welfare_curve.csv", buf)?;
    let eqs = find_equilibria(&cfg.params, cfg.equilibrium.grid_size, cfg.equilibrium.tol)?;
    let private = eqs.highest_stable().map_or(f64::NAN, |p| p.phi_star);
    let wedge = overinvestment_wedge_from(&curve, &eqs).unwrap_or(f64::NAN);
    out.table(
        "welfare_optima.csv",
        &["weight", "phi_stab_star", "phi_social", "phi_eff_star", "phi_private", "wedge"],
        [vec![
            num(curve.weight),
            num(curve.phi_stab_star),
            num(curve.phi_social),
            num(curve.phi_eff_star),
            num(private),
            num(wedge),
        ]],
    )?;
    eprintln!(
        "welfare: stab {:.2} social {:.2} eff {:.2} private {:.3}",
        curve.phi_stab_star, curve.phi_social, curve.phi_eff_star, private
    );
    Ok(())
}

pub fn cmd_thirteenf(cfg: &ScenarioConfig, out: &OutputDir) -> Result<()> {
    let t = &cfg.thirteenf;
    let s = generate_synthetic_13f_detailed(&t.targets, t.institutions, t.assets, t.quarters, cfg.seed)?;
    let series = convergence_series(&s.panel)?;
    let mut buf = Vec::new();
    series.write_csv(&mut buf)?;
    out.csv("convergence.csv", buf)?;
    let kappa = (0..t.quarters).map(|q| {
        vec![
            s.panel.quarters[q].clone(),
            num(s.kappa_ai[q]),
            num(s.kappa_non_ai[q]),
            num(s.target_ai[q]),
            num(s.target_non_ai[q]),
        ]
    });
    out.table(
        "kappa.csv",
        &["quarter", "kappa_ai", "kappa_non_ai", "target_ai", "target_non_ai"],
        kappa.collect::<Vec<_>>(),
    )?;
    let mut rho = Vec::new();
    for q in 1..t.quarters {
        rho.push(vec![
            s.panel.quarters[q].clone(),
            num(rho_pca(&s.panel, q, GroupFilter::Ai)?),
            num(rho_sync(&s.panel, q, GroupFilter::Ai)?),
            num(rho_pca(&s.panel, q, GroupFilter::NonAi)?),
            num(rho_sync(&s.panel, q, GroupFilter::NonAi)?),
        ]);
    }
    out.table(
        "homogeneity.csv",
        &["quarter", "rho_pca_ai", "rho_sync_ai", "rho_pca_non_ai", "rho_sync_non_ai"],
        rho,
    )?;
    let w = t.targets.window;
    out.table(
        "convergence_summary.csv",
        &["series", "first_window", "last_window", "relative_rise"],
        [
            ("all", &series.aggregate),
            ("ai_ai", &series.ai_ai),
            ("non_ai", &series.non_ai),
            ("cross", &series.cross),
        ]
        .iter()
        .map(|(name, xs)| {
            vec![
                name.to_string(),
                num(ConvergenceSeries::first_window(xs, w)),
                num(ConvergenceSeries::last_window(xs, w)),
                num(ConvergenceSeries::relative_rise(xs, w)),
            ]
        })
        .collect::<Vec<_>>(),
    )?;
    if t.write_panel {
        let mut buf = Vec::new();
        s.panel.write_csv(&mut buf)?;
        out.csv("holdings.csv", buf)?;
        let mut bin = Vec::new();
        s.panel.write_cache(&mut bin)?;
        out.raw("holdings.bin", &bin)?;
    }
    Ok(())
}

pub fn cmd_dispersion(cfg: &ScenarioConfig, out: &OutputDir) -> Result<()> {
    let d = &cfg.dispersion;
    let fund_cfg = d.fund_config(&cfg.params, cfg.alpha_units);
    let panel = simulate_fund_panel(&fund_cfg, cfg.seed)?;
    let report = DispersionReport::from_panel(&panel, d.window)?;
    let mut buf = Vec::new();
    report.write_csv(&panel, &mut buf)?;
    out.csv("dispersion.csv", buf)?;
    out.table(
        "dispersion_summary.csv",
        &["ai_first", "ai_last", "ai_decline", "human_first", "human_last", "human_decline", "ratio_start", "ratio_end"],
        [vec![
            num(report.ai.first()),
            num(report.ai.last()),
            num(report.ai_decline),
            num(report.human.first()),
            num(report.human.last()),
            num(report.human_decline),
            num(report.ratio_start),
            num(report.ratio_end),
        ]],
    )?;
    let mut rows = Vec::new();
    for (i, &phi) in d.vintages.iter().enumerate() {
        let mut p = cfg.params.clone();
        p.phi = phi;
        let series = signal_return_series(
            &p,
            &MarketConfig::default(),
            d.vintage_months,
            d.vintage_replications,
            3.0,
            derive_seed(cfg.seed, stream::HALF_LIFE, i as u64),
        )?;
        let est = estimate_half_life(&series, &format!("phi={phi}"))?;
        rows.push(vec![
            est.vintage.clone(),
            num(phi),
            est.h_hat.map_or_else(|| num(f64::NAN), num),
            num(est.theta_eff_hat),
            num(est.r_squared),
            serde_json::to_string(&est.status)?.trim_matches('"').to_string(),
            num(mean_half_life(&p, phi)?),
        ]);
    }
    out.table(
        "halflife_vintages.csv",
        &["vintage", "phi", "h_hat", "theta_eff_hat", "r_squared", "status", "h_model"],
        rows,
    )?;
    eprintln!(
        "dispersion: AI decline {:.3}, human decline {:.3}, ratio {:.3} -> {:.3}",
        report.ai_decline, report.human_decline, report.ratio_start, report.ratio_end
    );
    Ok(())
}

fn sensitivity_range(p: SensitivityParam) -> (f64, f64) {
    match p {
        SensitivityParam::Phi => (0.0, 1.0),
        SensitivityParam::Rho => (0.0, 1.0),
        SensitivityParam::Beta => (0.0, 0.5),
        SensitivityParam::NInstitutions => (10.0, 200.0),
        SensitivityParam::KSignals => (1.0, 10.0),
        SensitivityParam::Theta => (0.004, 0.04),
    }
}

fn sensitivity_name(p: SensitivityParam) -> &'static str {
    match p {
        SensitivityParam::Phi => "phi",
        SensitivityParam::Rho => "rho",
        SensitivityParam::Beta => "beta",
        SensitivityParam::NInstitutions => "n_institutions",
        SensitivityParam::KSignals => "k_signals",
        SensitivityParam::Theta => "theta",
    }
}

/// One parameter per panel, the rest at the scenario values.
pub fn cmd_sensitivity(cfg: &ScenarioConfig, out: &OutputDir) -> Result<()> {
    let base = &cfg.params;
    let mut rows = Vec::new();
    for &panel in &cfg.sensitivity.panels {
        let (lo, hi) = sensitivity_range(panel);
        let integer = matches!(panel, SensitivityParam::NInstitutions | SensitivityParam::KSignals);
        let mut values = linspace(lo, hi, cfg.sensitivity.points);
        if integer {
            values.iter_mut().for_each(|v| *v = v.round());
            values.dedup();
        }
        for v in values {
            let mut p = base.clone();
            let mut phi = base.phi;
            match panel {
                SensitivityParam::Phi => phi = v,
                SensitivityParam::Rho => p = with_rho(base, v),
                SensitivityParam::Beta => p.beta = v,
                SensitivityParam::NInstitutions => p.n_institutions = v as usize,
                SensitivityParam::KSignals => {
                    let template = base.signals[0].clone();
                    p.signals.resize(v as usize, template);
                }
                SensitivityParam::Theta => p.signals.iter_mut().for_each(|s| s.theta = v),
            }
            rows.push(vec![sensitivity_name(panel).to_string(), num(v), num(mean_half_life(&p, phi)?)]);
        }
    }
    out.table("sensitivity.csv", &["parameter", "value", "h"], rows)?;
    Ok(())
}
