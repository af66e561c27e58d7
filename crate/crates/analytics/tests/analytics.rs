use analytics::*;
use market_sim::{signal_return_series, MarketConfig};
use model_core::seed::rng_from;
use model_core::ModelParams;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

fn q(n: usize) -> Vec<String> {
    quarter_labels("2013Q1", n).unwrap()
}

fn dense_panel(labels: Vec<Group>, quarters: Vec<Vec<Vec<f64>>>) -> HoldingsPanel {
    HoldingsPanel::from_dense(q(quarters.len()), labels, &quarters).unwrap()
}

fn normalize(w: &[f64]) -> Vec<f64> {
    let s: f64 = w.iter().sum();
    w.iter().map(|x| x / s).collect()
}

// ---------- cosine and convergence index ----------

#[test]
fn cosine_examples() {
    let a = [0.2, 0.3, 0.5];
    assert!((cosine_similarity(&a, &a).unwrap() - 1.0).abs() < 1e-15);
    assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
    let r = 0.5f64.sqrt();
    let c = cosine_similarity(&[r, r, 0.0], &[r, 0.0, r]).unwrap();
    assert!((c - 0.5).abs() < 1e-15);
    assert!(cosine_similarity(&[0.0, 0.0], &[1.0, 0.0]).is_err());
}

#[test]
fn sparse_and_dense_cosine_agree() {
    let a = [0.0, 0.4, 0.0, 0.6, 0.0];
    let b = [0.1, 0.2, 0.0, 0.3, 0.4];
    let s = sparse_cosine(&SparseWeights::from_dense(&a), &SparseWeights::from_dense(&b)).unwrap();
    assert!((s - cosine_similarity(&a, &b).unwrap()).abs() < 1e-15);
}

#[test]
fn identical_portfolios_converge_to_one() {
    let w = vec![0.1, 0.2, 0.3, 0.4];
    let p = dense_panel(vec![Group::Ai, Group::Ai, Group::NonAi], vec![vec![w.clone(), w.clone(), w]]);
    let c = convergence_index(&p, 0, GroupFilter::All).unwrap();
    assert!((c.index - 1.0).abs() < 1e-12);
    assert_eq!(c.pairs, 3);
}

#[test]
fn orthogonal_holders_have_zero_index() {
    let p = dense_panel(vec![Group::Ai, Group::NonAi], vec![vec![vec![1.0, 0.0], vec![0.0, 1.0]]]);
    assert_eq!(convergence_index(&p, 0, GroupFilter::All).unwrap().index, 0.0);
}

#[test]
fn three_institution_index_is_brute_force_mean() {
    let rows = vec![
        normalize(&[3.0, 1.0, 0.0, 2.0]),
        normalize(&[0.0, 1.0, 1.0, 1.0]),
        normalize(&[5.0, 0.0, 2.0, 0.0]),
    ];
    let p = dense_panel(vec![Group::Ai, Group::Ai, Group::NonAi], vec![rows.clone()]);
    let cos = |x: &[f64], y: &[f64]| {
        let d: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
        d / (x.iter().map(|a| a * a).sum::<f64>().sqrt() * y.iter().map(|a| a * a).sum::<f64>().sqrt())
    };
    let want = (cos(&rows[0], &rows[1]) + cos(&rows[0], &rows[2]) + cos(&rows[1], &rows[2])) / 3.0;
    let got = convergence_index(&p, 0, GroupFilter::All).unwrap();
    assert!((got.index - want).abs() < 1e-14);
    let ai = convergence_index(&p, 0, GroupFilter::Ai).unwrap();
    assert!((ai.index - cos(&rows[0], &rows[1])).abs() < 1e-14);
    assert_eq!(ai.pairs, 1);
    let cross = convergence_index(&p, 0, GroupFilter::Cross).unwrap();
    assert_eq!(cross.pairs, 2);
    assert!((cross.index - (cos(&rows[0], &rows[2]) + cos(&rows[1], &rows[2])) / 2.0).abs() < 1e-14);
    assert!(convergence_index(&p, 0, GroupFilter::NonAi).is_err());
}

#[test]
fn panel_validation_rejects_bad_rows() {
    let bad_sum = HoldingsPanel::from_dense(q(1), vec![Group::Ai; 2], &[vec![vec![0.5, 0.4], vec![0.5, 0.5]]]);
    assert!(matches!(bad_sum, Err(AnalyticsError::InvalidPanel(_))));
    let negative = HoldingsPanel::from_dense(q(1), vec![Group::Ai; 2], &[vec![vec![1.2, -0.2], vec![0.5, 0.5]]]);
    assert!(negative.is_err());
    let missing_label = HoldingsPanel::from_dense(q(1), vec![Group::Ai], &[vec![vec![1.0, 0.0], vec![0.5, 0.5]]]);
    assert!(missing_label.is_err());
}

// ---------- panel IO ----------

fn small_synthetic() -> HoldingsPanel {
    let t = ConvergenceTargets {
        breaks: vec!["2014Q1".into()],
        holdings: 10,
        ..Default::default()
    };
    generate_synthetic_13f(&t, 12, 40, 10, 9).unwrap()
}

#[test]
fn csv_round_trip() {
    let p = small_synthetic();
    let mut buf = Vec::new();
    p.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("institution,group,quarter,asset,weight\n"));
    let back = HoldingsPanel::read_csv(buf.as_slice(), p.n_assets).unwrap();
    assert_eq!(back.labels, p.labels);
    assert_eq!(back.quarters, p.quarters);
    for qq in 0..p.n_quarters() {
        for i in 0..p.n_institutions() {
            assert_eq!(back.row(i, qq), p.row(i, qq));
        }
    }
}

#[test]
fn binary_cache_round_trip() {
    let p = small_synthetic();
    let mut buf = Vec::new();
    p.write_cache(&mut buf).unwrap();
    assert_eq!(HoldingsPanel::read_cache(buf.as_slice()).unwrap(), p);
    buf[0] = b'X';
    assert!(matches!(HoldingsPanel::read_cache(buf.as_slice()), Err(AnalyticsError::Format(_))));
}

#[test]
fn quarter_labels_roll_over_years() {
    assert_eq!(quarter_labels("2013Q3", 3).unwrap(), vec!["2013Q3", "2013Q4", "2014Q1"]);
    assert!(quarter_labels("2013Q5", 1).is_err());
}

// ---------- synthetic 13F ----------

#[test]
fn default_calibration_hits_convergence_targets() {
    let s = generate_synthetic_13f_detailed(&ConvergenceTargets::default(), 200, 500, 48, 11).unwrap();
    let c = convergence_series(&s.panel).unwrap();
    let first = ConvergenceSeries::first_window(&c.aggregate, 4);
    let last = ConvergenceSeries::last_window(&c.aggregate, 4);
    assert!((first - 0.21).abs() <= 0.02, "{first}");
    assert!((last - 0.30).abs() <= 0.02, "{last}");
    let ai = ConvergenceSeries::relative_rise(&c.ai_ai, 4);
    let non = ConvergenceSeries::relative_rise(&c.non_ai, 4);
    assert!((ai - 0.58).abs() <= 0.15, "{ai}");
    assert!((non - 0.19).abs() <= 0.15, "{non}");
    let ratio = (ai / non) / (0.58 / 0.19);
    assert!((ratio - 1.0).abs() <= 0.3, "{ratio}");
    assert_eq!(c.pairs_aggregate, 200 * 199 / 2);
    assert_eq!(c.pairs_ai_ai + c.pairs_non_ai + c.pairs_cross, c.pairs_aggregate);
    // AI steps: the κ path jumps at every break.
    for b in [21, 30, 40] {
        assert!(s.target_ai[b] > s.target_ai[b - 1] + 0.005);
    }
}

#[test]
fn zero_loading_gives_flat_noise_baseline() {
    let t = ConvergenceTargets {
        factor_loading: 0.0,
        ..Default::default()
    };
    let p = generate_synthetic_13f(&t, 60, 500, 48, 4).unwrap();
    let c = convergence_series(&p).unwrap();
    let lo = c.aggregate.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = c.aggregate.iter().copied().fold(0.0, f64::max);
    // Random top-60 subsets of 500 overlap on about 60²/500 names.
    assert!(hi < 0.15 && lo > 0.03, "{lo} {hi}");
    assert!(hi - lo < 0.02);
}

#[test]
fn generator_is_deterministic_per_seed() {
    assert_eq!(small_synthetic(), small_synthetic());
    let t = ConvergenceTargets {
        breaks: vec!["2014Q1".into()],
        holdings: 10,
        ..Default::default()
    };
    assert_ne!(generate_synthetic_13f(&t, 12, 40, 10, 10).unwrap(), small_synthetic());
}

#[test]
fn infeasible_targets_fail_calibration() {
    let t = ConvergenceTargets {
        start_level: 0.99,
        noise_sd: 5.0,
        kappa_max: 2.0,
        ..Default::default()
    };
    let r = generate_synthetic_13f(&t, 20, 200, 48, 1);
    assert!(matches!(r, Err(AnalyticsError::Calibration(_))), "{r:?}");
}

#[test]
fn generator_rejects_tiny_or_malformed_inputs() {
    let t = ConvergenceTargets::default();
    assert!(generate_synthetic_13f(&t, 3, 500, 48, 1).is_err());
    assert!(generate_synthetic_13f(&t, 20, 30, 48, 1).is_err());
    let late = ConvergenceTargets {
        breaks: vec!["2030Q1".into()],
        ..Default::default()
    };
    assert!(generate_synthetic_13f(&late, 20, 500, 48, 1).is_err());
}

// ---------- observable homogeneity ----------

fn two_quarter(labels: Vec<Group>, before: Vec<Vec<f64>>, after: Vec<Vec<f64>>) -> HoldingsPanel {
    dense_panel(labels, vec![before, after])
}

#[test]
fn identical_changes_give_full_homogeneity() {
    let before = vec![vec![0.25; 4]; 5];
    let after = vec![vec![0.4, 0.1, 0.3, 0.2]; 5];
    let p = two_quarter(vec![Group::Ai; 5], before, after);
    assert!((rho_pca(&p, 1, GroupFilter::Ai).unwrap() - 1.0).abs() < 1e-12);
    assert!((rho_sync(&p, 1, GroupFilter::Ai).unwrap() - 0.5).abs() < 1e-15);
}

#[test]
fn no_changes_are_rank_deficient() {
    let w = vec![vec![0.5, 0.5]; 4];
    let p = two_quarter(vec![Group::Ai; 4], w.clone(), w);
    assert!(matches!(rho_pca(&p, 1, GroupFilter::All), Err(AnalyticsError::RankDeficient(_))));
    assert!(rho_sync(&p, 1, GroupFilter::All).is_err());
    assert!(rho_pca(&p, 0, GroupFilter::All).is_err());
}

#[test]
fn estimators_need_three_institutions() {
    let p = two_quarter(vec![Group::Ai, Group::Ai], vec![vec![0.5, 0.5]; 2], vec![vec![0.6, 0.4]; 2]);
    assert!(rho_pca(&p, 1, GroupFilter::All).is_err());
    assert!(rho_sync(&p, 1, GroupFilter::All).is_err());
}

#[test]
fn independent_changes_match_random_matrix_edge() {
    // Top eigenvalue of a white n×n sample covariance over M assets sits near
    // (1 + √(n/M))², so its share of the trace is that over n.
    let (n, m) = (100usize, 500usize);
    let edge = (1.0 + (n as f64 / m as f64).sqrt()).powi(2) / n as f64;
    let mut acc = 0.0;
    for seed in 0..10 {
        acc += rho_pca(&planted_homogeneity_panel(n, m, 0.0, seed).unwrap(), 1, GroupFilter::All).unwrap();
    }
    let mean = acc / 10.0;
    assert!((mean / edge - 1.0).abs() < 0.15, "{mean} vs {edge}");
}

#[test]
fn pca_recovers_planted_factor_share() {
    for s in [0.1, 0.3, 0.5, 0.7, 0.9] {
        let p = planted_homogeneity_panel(100, 500, s, 21).unwrap();
        let r = rho_pca(&p, 1, GroupFilter::All).unwrap();
        assert!((r - s).abs() < 0.05, "s={s}: {r}");
    }
}

#[test]
fn sync_matches_gaussian_sign_agreement() {
    // Two unit-variance normals with correlation ρ share a sign with
    // probability 1/2 + arcsin(ρ)/π.
    for s in [0.3, 0.7] {
        let p = planted_homogeneity_panel(60, 800, s, 5).unwrap();
        let got = rho_sync(&p, 1, GroupFilter::All).unwrap();
        let want = s.asin() / std::f64::consts::PI;
        assert!((got - want).abs() < 0.02, "{s}: {got} vs {want}");
    }
}

#[test]
fn sync_is_centered_under_independent_trading() {
    let vals: Vec<f64> = (0..50)
        .map(|seed| rho_sync(&planted_homogeneity_panel(40, 400, 0.0, seed).unwrap(), 1, GroupFilter::All).unwrap())
        .collect();
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let se = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
    assert!(mean.abs() < 3.0 * se, "{mean} (se {se})");
}

/// Every institution follows a common sign with probability q, so a pair
/// agrees with probability p = q² + (1 − q)². Magnitudes are fixed, zero
/// changes are absent.
fn bernoulli_panel(n: usize, m: usize, p_agree: f64, seed: u64) -> HoldingsPanel {
    let qf = 0.5 + 0.5 * (2.0 * p_agree - 1.0).sqrt();
    let mut rng = rng_from(seed);
    let common: Vec<f64> = (0..m).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
    let base = 1.0 / m as f64;
    let before = vec![vec![base; m]; n];
    let after = (0..n)
        .map(|_| {
            // Pair assets so each ± move is offset and rows keep summing to one.
            let mut w = vec![base; m];
            for a in (0..m).step_by(2) {
                let s = if rng.random::<f64>() < qf { common[a] } else { -common[a] };
                w[a] += 0.3 * base * s;
                w[a + 1] -= 0.3 * base * s;
            }
            w
        })
        .collect();
    two_quarter(vec![Group::Ai; n], before, after)
}

#[test]
fn sync_recovers_bernoulli_agreement() {
    for p in [0.6, 0.8] {
        let panel = bernoulli_panel(40, 600, p, 17);
        let got = rho_sync(&panel, 1, GroupFilter::Ai).unwrap();
        assert!((got - (p - 0.5)).abs() < 0.02, "{p}: {got}");
    }
}

#[test]
fn sync_excludes_zero_changes() {
    // Asset 2 is unchanged for everyone: it must not count as a match.
    let before = vec![vec![0.25, 0.25, 0.5]; 3];
    let after = vec![vec![0.35, 0.15, 0.5], vec![0.3, 0.2, 0.5], vec![0.15, 0.35, 0.5]];
    let p = two_quarter(vec![Group::Ai; 3], before, after);
    // Pairs (0,1) agree on both assets, (0,2) and (1,2) on neither.
    let want = (1.0 + 0.0 + 0.0) / 3.0 - 0.5;
    assert!((rho_sync(&p, 1, GroupFilter::Ai).unwrap() - want).abs() < 1e-15);
}

#[test]
fn estimators_rank_planted_homogeneity() {
    let grid = [0.1, 0.3, 0.5, 0.7, 0.9];
    for seed in 0..10 {
        let (mut pca, mut sync) = (Vec::new(), Vec::new());
        for &r in &grid {
            let p = planted_homogeneity_panel(60, 400, r, seed).unwrap();
            pca.push(rho_pca(&p, 1, GroupFilter::All).unwrap());
            sync.push(rho_sync(&p, 1, GroupFilter::All).unwrap());
        }
        assert!(pca.windows(2).all(|w| w[1] > w[0]), "{pca:?}");
        assert!(sync.windows(2).all(|w| w[1] > w[0]), "{sync:?}");
    }
}

// ---------- dispersion ----------

#[test]
fn dispersion_examples() {
    let labels = vec![Group::Ai; 3];
    let same = vec![vec![0.01, -0.02, 0.03, 0.0]; 3];
    let d = return_dispersion(&same, &labels, 2, GroupFilter::Ai).unwrap();
    assert!(d.values.iter().all(|&v| v == 0.0));
    assert_eq!(d.months, vec![1, 2, 3]);

    let x = 0.03;
    let two = vec![vec![x; 6], vec![-x; 6]];
    let d = return_dispersion(&two, &[Group::NonAi; 2], 3, GroupFilter::NonAi).unwrap();
    for v in d.values {
        assert!((v - x * 2f64.sqrt()).abs() < 1e-15);
    }
}

#[test]
fn dispersion_rejects_bad_inputs() {
    let r = vec![vec![0.0; 5]; 3];
    let l = vec![Group::Ai, Group::Ai, Group::NonAi];
    assert!(return_dispersion(&r, &l, 1, GroupFilter::All).is_err());
    assert!(return_dispersion(&r, &l, 2, GroupFilter::NonAi).is_err());
    assert!(return_dispersion(&r, &l, 6, GroupFilter::All).is_err());
    assert!(return_dispersion(&r, &l, 2, GroupFilter::Cross).is_err());
}

#[test]
fn dispersion_window_is_trailing_mean_of_monthly_sd() {
    let mut rng = rng_from(3);
    let r: Vec<Vec<f64>> = (0..4).map(|_| (0..8).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()).collect();
    let sd = |t: usize| {
        let col: Vec<f64> = r.iter().map(|f| f[t]).collect();
        let m = col.iter().sum::<f64>() / 4.0;
        (col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / 3.0).sqrt()
    };
    let d = return_dispersion(&r, &[Group::Ai; 4], 3, GroupFilter::All).unwrap();
    for (k, &end) in d.months.iter().enumerate() {
        let want = (sd(end - 2) + sd(end - 1) + sd(end)) / 3.0;
        assert!((d.values[k] - want).abs() < 1e-14);
    }
}

#[test]
fn fund_panel_reproduces_dispersion_targets() {
    let cfg = FundPanelConfig::default();
    let panel = simulate_fund_panel(&cfg, 42).unwrap();
    let r = DispersionReport::from_panel(&panel, cfg.window).unwrap();
    assert!((r.ai_decline - 0.29).abs() <= 0.05, "{}", r.ai_decline);
    assert!((r.human_decline - 0.10).abs() <= 0.05, "{}", r.human_decline);
    assert!((r.ratio_end - 0.64).abs() <= 0.08, "{}", r.ratio_end);
    assert!((r.ratio_start - 0.82).abs() <= 0.05, "{}", r.ratio_start);
    assert!(r.ai.first() > r.ai.last() && r.human.first() > r.human.last());
    let mut buf = Vec::new();
    r.write_csv(&panel, &mut buf).unwrap();
    assert!(String::from_utf8(buf).unwrap().starts_with("month,phi,d_ai,d_human,ratio,ai_alpha\n"));
}

#[test]
fn alpha_unit_map_is_affine_through_anchors() {
    let m = AlphaUnitMap::through((1.48, 1.04), (3.6, 1.0)).unwrap();
    assert!((m.apply(1.48) - 3.6).abs() < 1e-12);
    assert!((m.apply(1.04) - 1.0).abs() < 1e-12);
    assert!(AlphaUnitMap::through((1.0, 1.0), (0.0, 1.0)).is_err());
}

// ---------- half-life ----------

#[test]
fn exact_exponential_inverts_to_half_life() {
    let xs: Vec<f64> = (0..60).map(|t| 2.0 * (-0.012 * t as f64).exp()).collect();
    let e = estimate_half_life(&xs, "pre").unwrap();
    assert!((e.h_hat.unwrap() - 57.76).abs() < 0.01);
    assert_eq!(e.status, FitStatus::Converged);
    assert_eq!(e.method, FitMethod::LogLinear);
    assert!((e.alpha0_hat - 2.0).abs() < 1e-10);
    assert_eq!(e.vintage, "pre");
}

#[test]
fn noisy_series_recovers_current_half_life() {
    let theta = 0.0386;
    let mut acc = 0.0;
    for seed in 0..100 {
        let mut rng = rng_from(seed);
        let xs: Vec<f64> = (0..60)
            .map(|t| {
                let z: f64 = rng.sample(StandardNormal);
                (-theta * t as f64).exp() * (1.0 + 0.1 * z)
            })
            .collect();
        acc += estimate_half_life(&xs, "cur").unwrap().h_hat.unwrap();
    }
    let h = acc / 100.0;
    assert!((h - 18.0).abs() <= 2.0, "{h}");
}

#[test]
fn negative_values_switch_to_nonlinear_fit() {
    let mut rng = rng_from(8);
    let xs: Vec<f64> = (0..120)
        .map(|t| {
            let z: f64 = rng.sample(StandardNormal);
            (-0.0386 * t as f64).exp() + 0.05 * z
        })
        .collect();
    assert!(xs.iter().any(|&x| x < 0.0));
    let e = estimate_half_life(&xs, "noisy").unwrap();
    assert_eq!(e.method, FitMethod::Nonlinear);
    assert!((e.h_hat.unwrap() - 17.96).abs() < 2.0, "{e:?}");
    assert!(e.r_squared > 0.9);
}

#[test]
fn growing_series_reports_no_decay() {
    let xs: Vec<f64> = (0..24).map(|t| 1.0 + 0.01 * t as f64).collect();
    let e = estimate_half_life(&xs, "x").unwrap();
    assert_eq!(e.status, FitStatus::NoDecay);
    assert!(e.h_hat.is_none());
}

#[test]
fn half_life_preconditions() {
    assert!(estimate_half_life(&[1.0; 11], "x").is_err());
    let mut xs = vec![1.0; 20];
    xs[0] = -1.0;
    assert!(estimate_half_life(&xs, "x").is_err());
}

#[test]
fn simulated_market_alpha_has_current_half_life() {
    let p = ModelParams::baseline();
    let s = signal_return_series(&p, &MarketConfig::default(), 36, 100, 3.0, 77).unwrap();
    let e = estimate_half_life(&s, "sim").unwrap();
    let h = e.h_hat.unwrap();
    assert!((14.0..=24.0).contains(&h), "{h}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn half_life_round_trip(theta in 0.002f64..0.5, a0 in 0.1f64..10.0) {
        let xs: Vec<f64> = (0..48).map(|t| a0 * (-theta * t as f64).exp()).collect();
        let h = estimate_half_life(&xs, "p").unwrap().h_hat.unwrap();
        let want = std::f64::consts::LN_2 / theta;
        prop_assert!((h / want - 1.0).abs() < 5e-5);
    }

    #[test]
    fn cosine_is_scale_invariant(
        a in prop::collection::vec(0.0f64..1.0, 8),
        b in prop::collection::vec(0.0f64..1.0, 8),
        s in 0.01f64..100.0,
    ) {
        prop_assume!(a.iter().sum::<f64>() > 0.1 && b.iter().sum::<f64>() > 0.1);
        let scaled: Vec<f64> = a.iter().map(|x| x * s).collect();
        let c1 = cosine_similarity(&a, &b).unwrap();
        let c2 = cosine_similarity(&scaled, &b).unwrap();
        prop_assert!((c1 - c2).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&c1));
    }

    #[test]
    fn convergence_index_lies_in_unit_interval(seed in 0u64..500) {
        let mut rng = rng_from(seed);
        let rows: Vec<Vec<f64>> = (0..5)
            .map(|_| normalize(&(0..6).map(|_| rng.random::<f64>()).collect::<Vec<_>>()))
            .collect();
        let p = dense_panel(vec![Group::Ai, Group::NonAi, Group::Ai, Group::NonAi, Group::Ai], vec![rows]);
        for f in [GroupFilter::All, GroupFilter::Ai, GroupFilter::NonAi, GroupFilter::Cross] {
            let c = convergence_index(&p, 0, f).unwrap();
            prop_assert!((0.0..=1.0 + 1e-12).contains(&c.index));
        }
    }
}
