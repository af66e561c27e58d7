use market_sim::*;
use model_core::seed::{derive_seed, rng_from};
use model_core::{decay_at, LambdaRegime, ModelParams};
use proptest::prelude::*;

fn baseline_at(phi: f64) -> ModelParams {
    let mut p = ModelParams::baseline();
    p.phi = phi;
    p
}

fn quiet() -> MarketConfig {
    MarketConfig::default()
}

fn corr(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

fn error_pair(rho: f64, sigma_eta: f64, sigma_nu: f64, ticks: usize) -> (Vec<f64>, Vec<f64>) {
    let mut p = ModelParams::baseline();
    p.market.sigma_eta = sigma_eta;
    p.market.sigma_nu = sigma_nu;
    for s in &mut p.signals {
        s.rho = rho;
    }
    let agents = AgentSpec::population(2, 1.0, 0.0);
    let f = vec![0.3; p.k_signals()];
    let mut rng = rng_from(17);
    let mut obs = Observations::default();
    let (mut e1, mut e2) = (Vec::new(), Vec::new());
    for _ in 0..ticks {
        generate_signals(&f, &agents, &p.signals, &p.market, &mut rng, &mut obs);
        e1.push(obs.agent(0)[0] - f[0]);
        e2.push(obs.agent(1)[0] - f[0]);
    }
    (e1, e2)
}

#[test]
fn monoculture_observations_coincide() {
    let p = {
        let mut p = ModelParams::baseline();
        for s in &mut p.signals {
            s.rho = 1.0;
        }
        p
    };
    let agents = AgentSpec::population(10, 1.0, 0.0);
    let f = vec![0.1, -0.2, 0.3, 0.0, 1.0];
    let mut obs = Observations::default();
    generate_signals(&f, &agents, &p.signals, &p.market, &mut rng_from(3), &mut obs);
    for i in 1..10 {
        assert_eq!(obs.agent(i), obs.agent(0));
    }
    for (k, fk) in f.iter().enumerate() {
        assert_eq!(obs.agent(0)[k], fk + obs.eta[k]);
    }
}

#[test]
fn error_correlation_tracks_homogeneity() {
    let (a, b) = error_pair(0.0, 1.8, 2.0, 100_000);
    assert!(corr(&a, &b).abs() < 0.01);

    let (rho, s) = (0.6f64, 1.5f64);
    let (a, b) = error_pair(rho, s, s, 100_000);
    let oracle = rho * rho * s * s / (rho * rho * s * s + (1.0 - rho * rho) * s * s);
    assert!((oracle - 0.36).abs() < 1e-12);
    assert!((corr(&a, &b) - oracle).abs() < 0.01);
}

#[test]
fn demand_is_linear() {
    let s = ModelParams::baseline().signals[0].clone();
    assert_eq!(agent_demand(0.0, &s), 0.0);
    let unit = model_core::SignalSpec { a: 1.0, ..s };
    assert!((agent_demand(0.1, &unit) - 0.1).abs() < 1e-15);
}

#[test]
fn aggregate_ai_demand_in_monoculture() {
    let mut p = ModelParams::baseline();
    p.market.sigma_nu = 0.0;
    for s in &mut p.signals {
        s.rho = 1.0;
    }
    let agents = AgentSpec::population(100, 0.7, 0.0);
    let f = vec![0.4, -0.1, 0.2, 0.0, 0.3];
    let mut obs = Observations::default();
    generate_signals(&f, &agents, &p.signals, &p.market, &mut rng_from(9), &mut obs);
    for (k, fk) in f.iter().enumerate() {
        let total: f64 = (0..70).map(|i| agent_demand(obs.agent(i)[k], &p.signals[k])).sum();
        let oracle = 100.0 * 0.7 * p.signals[k].a * (fk + obs.eta[k]);
        assert!((total - oracle).abs() < 1e-12 * oracle.abs().max(1.0));
    }
}

#[test]
fn price_update_examples() {
    assert_eq!(price_update(100.0, 0.0, 2.0).unwrap(), 100.0);
    assert_eq!(price_update(100.0, 2.0, 0.5).unwrap(), 101.0);
    assert!(price_update(100.0, 2.0, 0.0).is_err());
}

fn mse(path: &MarketPath, burn: usize) -> f64 {
    let e = &path.pricing_errors()[burn..];
    e.iter().map(|x| x * x).sum::<f64>() / e.len() as f64
}

#[test]
fn ai_flow_pulls_price_toward_value() {
    // information channel only: no jumps for feedback to amplify
    let cfg = MarketConfig {
        feedback: false,
        jump_rate: 0.0,
        ..MarketConfig::default()
    };
    let (mut with_ai, mut without) = (0.0, 0.0);
    for r in 0..20 {
        let seed = derive_seed(4, 0, r);
        with_ai += mse(&run_market_with(&baseline_at(0.7), &cfg, 3000, seed).unwrap(), 300);
        without += mse(&run_market_with(&baseline_at(0.0), &cfg, 3000, seed).unwrap(), 300);
    }
    assert!(with_ai < without, "{with_ai} vs {without}");
}

#[test]
fn humans_only_price_worse_than_half_adoption() {
    let a = mse(&run_market_with(&baseline_at(0.0), &quiet(), 10_000, 2).unwrap(), 300);
    let b = mse(&run_market_with(&baseline_at(0.5), &quiet(), 10_000, 2).unwrap(), 300);
    assert!(a > b, "{a} vs {b}");
}

#[test]
fn degenerate_market_prices_at_vbar() {
    let mut p = ModelParams::baseline();
    p.signals.clear();
    p.market.lambda_regime = LambdaRegime::Constant;
    p.market.sigma_u = 0.0;
    p.market.sigma_eps = 0.0;
    let cfg = MarketConfig {
        jump_rate: 0.0,
        ..MarketConfig::default()
    };
    let path = run_market_with(&p, &cfg, 200, 1).unwrap();
    assert!(path.ticks.iter().all(|t| t.p == cfg.vbar && t.v == cfg.vbar));
}

#[test]
fn runs_are_deterministic() {
    let p = baseline_at(0.7);
    let a = run_market(&p, 400, 12).unwrap();
    let b = run_market(&p, 400, 12).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, run_market(&p, 400, 13).unwrap());
    assert!(run_market(&p, 0, 1).is_err());
    let mut buf = Vec::new();
    a.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("t,v,p,order_flow,noise_flow,f_1,f_2,f_3,f_4,f_5\n"));
    assert_eq!(text.lines().count(), 401);
}

#[test]
fn order_flow_accounting_is_exact() {
    let path = run_market(&baseline_at(0.63), 500, 8).unwrap();
    for (t, rec) in path.ticks.iter().enumerate() {
        let mut informed = 0.0;
        for i in 0..path.agents.len() {
            informed += path.agent_total_demand(i, t).unwrap();
        }
        assert_eq!(rec.order_flow, informed + rec.noise_flow);
    }
}

#[test]
fn zero_position_has_zero_alpha() {
    let mut path = run_market(&baseline_at(0.5), 300, 1).unwrap();
    path.positions[0].iter_mut().for_each(|q| *q = 0.0);
    let a = measure_alpha(&path, &path.agents[0].clone(), 0.1).unwrap();
    assert!(a.per_signal.iter().all(|x| *x == 0.0));
    assert_eq!(a.total, 0.0);
}

#[test]
fn alpha_needs_a_path_and_a_tracked_agent() {
    let path = run_market(&baseline_at(0.5), 2, 1).unwrap();
    assert!(measure_alpha(&path, &path.agents[0].clone(), 0.1).is_err());
    let untracked = run_market_with(&baseline_at(0.5), &quiet(), 50, 1).unwrap();
    assert!(matches!(
        measure_alpha(&untracked, &untracked.agents[0].clone(), 0.1),
        Err(MarketError::Untracked(0))
    ));
}

fn lone_ai_alpha(phi: f64, seeds: u64) -> f64 {
    let cfg = MarketConfig {
        tracking: Tracking::Agents(vec![0]),
        ..MarketConfig::default()
    };
    let mut acc = 0.0;
    for s in 0..seeds {
        let path = run_market_with(&baseline_at(phi), &cfg, 2000, derive_seed(21, 0, s)).unwrap();
        acc += measure_alpha(&path, &path.agents[0].clone(), 0.1).unwrap().total;
    }
    acc / seeds as f64
}

#[test]
fn early_adopter_earns_more_than_late_one() {
    let early = lone_ai_alpha(0.01, 50);
    let late = lone_ai_alpha(0.9, 50);
    assert!(early > 0.0 && early > late, "{early} vs {late}");
}

#[test]
fn ai_beats_humans_at_low_adoption() {
    let p = baseline_at(0.1);
    assert!(p.market.sigma_eta < p.market.sigma_h);
    let (mut ai, mut hu) = (0.0, 0.0);
    for s in 0..20 {
        let path = run_market(&p, 1500, derive_seed(22, 0, s)).unwrap();
        for ag in &path.agents {
            let a = measure_alpha(&path, ag, 0.1).unwrap().total;
            match ag.kind {
                AgentKind::Ai => ai += a / 10.0,
                AgentKind::Human => hu += a / 90.0,
            }
        }
    }
    assert!(ai >= hu, "{ai} vs {hu}");
    let path = run_market(&p, 500, 3).unwrap();
    let agg = aggregate_alpha(&path, 0.1).unwrap();
    let manual: f64 = path.agents[..10].iter().map(|a| measure_alpha(&path, a, 0.1).unwrap().total).sum();
    assert!((agg - manual).abs() < 1e-12 * manual.abs().max(1.0));
}

fn mean_omega(phi: f64, seeds: u64, ticks: usize) -> f64 {
    let p = baseline_at(phi);
    let mut acc = 0.0;
    for s in 0..seeds {
        let path = run_market_with(&p, &quiet(), ticks, derive_seed(30, 0, s)).unwrap();
        acc += retrain_regression(&path, 0, ticks).unwrap().omega_implied.unwrap();
    }
    acc / seeds as f64
}

#[test]
fn attenuation_law_on_three_adoption_levels() {
    for phi in [0.0, 0.35, 0.7] {
        let p = baseline_at(phi);
        let d = decay_at(&p, 0, phi).unwrap();
        let oracle = p.signals[0].theta / (p.signals[0].theta + d.delta);
        let omega = mean_omega(phi, 4, 50_000);
        assert!((omega / oracle - 1.0).abs() < 0.15, "phi {phi}: {omega} vs {oracle}");
    }
    assert!((mean_omega(0.0, 1, 100_000) - 1.0).abs() < 0.05);
}

#[test]
fn null_signal_has_no_slope() {
    let mut p = baseline_at(0.7);
    p.signals[2].beta_cf = 0.0;
    let path = run_market_with(&p, &quiet(), 20_000, 5).unwrap();
    let r = retrain_regression(&path, 2, 20_000).unwrap();
    assert!(r.beta_hat.abs() < 2.0 * r.std_error, "{r:?}");
    assert!(r.omega_implied.is_none());
    assert!(retrain_regression(&path, 2, 29).is_err());
    assert!(retrain_regression(&path, 9, 100).is_err());
}

fn pooled_errors(phi: f64, reps: u64, master: u64) -> Vec<Vec<f64>> {
    (0..reps)
        .map(|r| {
            let path = run_market_with(&baseline_at(phi), &quiet(), 3000, derive_seed(master, 0, r)).unwrap();
            path.pricing_errors()[300..].to_vec()
        })
        .collect()
}

#[test]
fn some_adoption_improves_price_accuracy() {
    let lo = pooled_errors(0.0, 50, 40);
    let mid = pooled_errors(0.5, 50, 40);
    let d: Vec<f64> = lo
        .iter()
        .zip(&mid)
        .map(|(a, b)| {
            let m = |v: &Vec<f64>| v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64;
            m(a) - m(b)
        })
        .collect();
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let sd = (d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!(mean / (sd / n.sqrt()) > 1.645, "t = {}", mean / (sd / n.sqrt()));
}

#[test]
fn heavy_adoption_fattens_the_tail() {
    let q99 = |phi: f64| {
        let mut all: Vec<f64> = pooled_errors(phi, 50, 41).concat().iter().map(|x| x.abs()).collect();
        all.sort_by(f64::total_cmp);
        all[(0.99 * all.len() as f64) as usize]
    };
    assert!(q99(0.9) > q99(0.3));
}

#[test]
fn crash_without_feedback_is_not_amplified() {
    let p = ModelParams::baseline();
    let cfg = CrashConfig {
        calm_rho: 0.5,
        stress_rho: 0.5,
        feedback_beta: 0.0,
        ..CrashConfig::default()
    };
    let b = flash_crash_batch(&p, &cfg, 20, 3).unwrap();
    assert!((b.mean_m_hat - 1.0).abs() < 0.1);
}

#[test]
fn stress_crash_multiplier() {
    let p = ModelParams::baseline();
    let b = flash_crash_batch(&p, &CrashConfig::default(), 100, 7).unwrap();
    assert!((b.mean_m_hat - 1.63).abs() <= 0.15, "{}", b.mean_m_hat);
    assert!(b.mean_observed > b.mean_fundamental);
}

#[test]
fn calm_crash_matches_closed_form_multiplier() {
    let p = ModelParams::baseline();
    let cfg = CrashConfig {
        calm_rho: 0.5,
        stress_rho: 0.5,
        ..CrashConfig::default()
    };
    let m = model_core::reflexive_multiplier(0.7, 0.5, 0.2, p.market.lambda_prime).unwrap();
    assert!((m - 1.3).abs() < 1e-9);
    let b = flash_crash_batch(&p, &cfg, 100, 8).unwrap();
    assert!((b.mean_m_hat - m).abs() <= 0.15, "{}", b.mean_m_hat);
}

#[test]
fn crash_past_the_pole_is_flagged() {
    let mut p = ModelParams::baseline();
    p.phi = 1.0;
    let s = flash_crash_with(
        &p,
        &CrashConfig {
            stress_rho: 1.0,
            feedback_beta: 0.5,
            ..CrashConfig::default()
        },
        1,
    )
    .unwrap();
    assert!(s.unstable && s.m_hat == f64::INFINITY);
    assert!(flash_crash(&p, 0.0, 0.4, 0.8, 1).is_err());
    assert!(flash_crash(&p, 0.03, 0.9, 0.8, 1).is_err());
}

#[test]
fn impulse_returns_decay_at_effective_rate() {
    let p = ModelParams::baseline();
    let s = signal_return_series(&p, &quiet(), 36, 100, 3.0, 5).unwrap();
    let xs: Vec<f64> = (0..36).map(|m| m as f64).collect();
    let ys: Vec<f64> = s.iter().map(|x| x.ln()).collect();
    let mx = xs.iter().sum::<f64>() / 36.0;
    let my = ys.iter().sum::<f64>() / 36.0;
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    let theta_eff = decay_at(&p, 0, p.phi).unwrap().theta_eff;
    assert!((-slope / theta_eff - 1.0).abs() < 0.1, "{} vs {theta_eff}", -slope);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn every_agent_draws_k_observations(n in 1usize..30, phi in 0.0f64..1.0, seed in 0u64..1000) {
        let p = ModelParams::baseline();
        let agents = AgentSpec::population(n, phi, 0.0);
        let mut obs = Observations::default();
        generate_signals(&[0.0; 5], &agents, &p.signals, &p.market, &mut rng_from(seed), &mut obs);
        prop_assert_eq!(obs.x.len(), n * 5);
        prop_assert_eq!(obs.eta.len(), 5);
    }

    #[test]
    fn price_update_is_affine(prior in -1e3f64..1e3, flow in -1e3f64..1e3, lam in 1e-3f64..10.0) {
        let p = price_update(prior, flow, lam).unwrap();
        prop_assert!((p - prior - lam * flow).abs() < 1e-9);
    }

    #[test]
    fn short_runs_replay_exactly(seed in 0u64..10_000, phi in 0.0f64..1.0) {
        let p = baseline_at(phi);
        let a = run_market_with(&p, &quiet(), 60, seed).unwrap();
        let b = run_market_with(&p, &quiet(), 60, seed).unwrap();
        prop_assert_eq!(a, b);
    }
}
