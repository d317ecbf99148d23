mod common;

use calibcc_core::calibration::{
    calibrate, feature, fit_platt, fit_scoped, CalibrationError, CalibratorScope, FitOptions, PlattObjective,
    PlattParams,
};
use calibcc_core::labeling::{levenshtein, preserved_ratio, LabeledObservation};
use calibcc_core::metrics::{self, BaseRateReference};
use calibcc_core::telemetry::LanguageTag;
use common::*;
use proptest::prelude::*;
use rand::Rng;

#[test]
fn binning_matches_explicit_edges() {
    let mut rng = seeded(11);
    for _ in 0..200 {
        let (preds, outcomes, bins) = random_instance(&mut rng, 200, 20);
        let b = metrics::bin(&preds, &outcomes, bins).unwrap();
        for &p in &preds {
            assert_eq!(metrics::bin_index(p, bins), oracle_bin_of(p, bins), "p={p} M={bins}");
        }
        assert_eq!(b.bins.iter().map(|s| s.count).sum::<usize>(), preds.len());
    }
}

#[test]
fn metrics_match_brute_force() {
    let mut rng = seeded(12);
    for _ in 0..300 {
        let (preds, outcomes, bins) = random_instance(&mut rng, 1000, 20);
        let b = metrics::bin(&preds, &outcomes, bins).unwrap();
        let ece = metrics::ece(&b);
        let mce = metrics::mce(&b);
        assert!((ece - oracle_ece(&preds, &outcomes, bins)).abs() < 1e-12);
        assert!((mce - oracle_mce(&preds, &outcomes, bins)).abs() < 1e-12);
        assert!(ece <= mce + 1e-15 && (0.0..=1.0).contains(&ece) && mce <= 1.0);
        let brier = metrics::brier(&preds, &outcomes).unwrap();
        assert!((brier - oracle_brier(&preds, &outcomes)).abs() < 1e-12);
    }
}

#[test]
fn merged_binnings_equal_binning_of_concatenation() {
    let mut rng = seeded(13);
    let (p1, y1, _) = random_instance(&mut rng, 300, 1);
    let (p2, y2, _) = random_instance(&mut rng, 300, 1);
    let whole = metrics::bin(
        &[p1.clone(), p2.clone()].concat(),
        &[y1.clone(), y2.clone()].concat(),
        12,
    )
    .unwrap();
    let merged = metrics::bin(&p1, &y1, 12)
        .unwrap()
        .merge(&metrics::bin(&p2, &y2, 12).unwrap())
        .unwrap();
    assert_eq!(whole.total, merged.total);
    for (a, b) in whole.bins.iter().zip(&merged.bins) {
        assert_eq!(a.count, b.count);
        assert!((a.sum_confidence - b.sum_confidence).abs() < 1e-9);
    }
}

#[test]
fn constant_forecast_brier_identity() {
    let mut rng = seeded(14);
    for _ in 0..200 {
        let n = rng.random_range(1..500);
        let outcomes: Vec<u8> = (0..n).map(|_| u8::from(rng.random::<f64>() < 0.3)).collect();
        let r: f64 = rng.random();
        let q = outcomes.iter().map(|&y| f64::from(y)).sum::<f64>() / n as f64;
        let bs = metrics::brier(&vec![r; n], &outcomes).unwrap();
        assert!((bs - (r * r - 2.0 * r * q + q)).abs() < 1e-12);
    }
}

#[test]
fn reference_posterior_lies_between_prior_and_window() {
    let mut rng = seeded(15);
    for _ in 0..1000 {
        let prior = BaseRateReference::from_mean(rng.random_range(0.01..0.99), rng.random_range(1.0..200.0)).unwrap();
        let n = rng.random_range(1..300);
        let rate = rng.random::<f64>();
        let window: Vec<u8> = (0..n).map(|_| u8::from(rng.random::<f64>() < rate)).collect();
        let empirical = window.iter().map(|&y| f64::from(y)).sum::<f64>() / n as f64;
        let post = prior.update(&window).predict();
        let (lo, hi) = (prior.predict().min(empirical), prior.predict().max(empirical));
        if (prior.predict() - empirical).abs() > 1e-12 {
            assert!(lo < post && post < hi, "{lo} {post} {hi}");
        }
    }
}

#[test]
fn levenshtein_matches_exhaustive_search() {
    let alphabet = ['a', 'b'];
    let strings = all_strings(&alphabet, 4);
    assert_eq!(strings.len(), 31);
    for a in &strings {
        for b in &strings {
            assert_eq!(levenshtein(a, b), oracle_edit_distance(a, b, &alphabet), "{a:?} {b:?}");
            if !(a.is_empty() && b.is_empty()) {
                let r = preserved_ratio(a, b).unwrap();
                assert!((0.0..=1.0).contains(&r));
                assert_eq!(r, preserved_ratio(b, a).unwrap());
                assert_eq!(r == 1.0, a == b);
            }
        }
    }
}

#[test]
fn kitten_sitting_from_oracle() {
    let alphabet: Vec<char> = "kitensg".chars().collect();
    assert_eq!(oracle_edit_distance("kitten", "sitting", &alphabet), 3);
    assert_eq!(levenshtein("kitten", "sitting"), 3);
    assert_eq!(oracle_edit_distance("ab", "xyz", &['a', 'b', 'x', 'y', 'z']), 3);
}

#[test]
fn feature_spot_values_against_direct_evaluation() {
    let eps = 1e-6f64;
    // 1 - (1 - eps) loses ~1e-11 relative precision in floating point.
    assert!((feature(1.0).unwrap() - ((1.0 - eps) / eps).ln()).abs() < 1e-9);
    let c = sigmoid(-1.0);
    assert!((feature(c).unwrap() + 1.0).abs() < 1e-12);
    let p = calibrate(&PlattParams::new(2.0, -1.0), 0.5).unwrap();
    assert!((p - sigmoid(-1.0)).abs() < 1e-15);
}

#[test]
fn recovers_generating_map() {
    let data = platt_samples(2024, 10_000, 2.0, -1.0);
    let p = fit_platt(&data, None, &FitOptions::default()).unwrap();
    assert!(p.converged, "{p:?}");
    assert!((p.slope_a - 2.0).abs() < 0.1, "{p:?}");
    assert!((p.intercept_b + 1.0).abs() < 0.1, "{p:?}");
    assert_eq!(p.n_fit, 10_000);

    let preds: Vec<f64> = data.iter().map(|(c, _)| p.apply(*c)).collect();
    let outcomes: Vec<u8> = data.iter().map(|(_, y)| *y).collect();
    assert!(oracle_ece(&preds, &outcomes, 10) < 0.02);
}

#[test]
fn gradient_agrees_with_finite_differences() {
    let data = platt_samples(99, 5_000, 1.5, 0.3);
    let opts = FitOptions::default();
    let objective = PlattObjective::new(&data, &opts).unwrap();
    let fitted = fit_platt(&data, None, &opts).unwrap();
    let f = |a: f64, b: f64| objective.value(a, b);
    // Off the optimum the gradient is O(0.1): plain relative error.
    for (a, b) in [
        (0.0, 0.0),
        (fitted.slope_a + 0.5, fitted.intercept_b - 0.3),
        (3.0, -2.0),
    ] {
        let g = objective.gradient(a, b);
        let fd = finite_difference(f, a, b, 1e-6);
        for k in 0..2 {
            let rel = (g[k] - fd[k]).abs() / g[k].abs().max(fd[k].abs());
            assert!(rel < 1e-4, "({a},{b}) k={k} g={} fd={}", g[k], fd[k]);
        }
    }
    // At the optimum both sides vanish; compare with a unit floor.
    let g = objective.gradient(fitted.slope_a, fitted.intercept_b);
    let fd = finite_difference(f, fitted.slope_a, fitted.intercept_b, 1e-6);
    for k in 0..2 {
        assert!((g[k] - fd[k]).abs() / g[k].abs().max(fd[k].abs()).max(1.0) < 1e-4);
    }
}

#[test]
fn warm_start_from_optimum_is_a_fixed_point() {
    let data = platt_samples(5, 3_000, 0.7, -0.8);
    let opts = FitOptions::default();
    let first = fit_platt(&data, None, &opts).unwrap();
    let again = fit_platt(&data, Some(&first), &opts).unwrap();
    assert!((first.slope_a - again.slope_a).abs() < 1e-8);
    assert!((first.intercept_b - again.intercept_b).abs() < 1e-8);
}

#[test]
fn scoped_fits_filter_rows() {
    let mut obs = Vec::new();
    for (i, (c, y)) in platt_samples(3, 600, 1.0, 0.0).into_iter().enumerate() {
        obs.push(LabeledObservation {
            confidence: c,
            ratio: f64::from(y),
            label: y,
            user: format!("u{}", i % 3),
            project: None,
            language: if i % 2 == 0 {
                LanguageTag::Java
            } else {
                LanguageTag::Python
            },
            timestamp: i as i64,
        });
    }
    let opts = FitOptions::default();
    let python = fit_scoped(&obs, &CalibratorScope::Language(LanguageTag::Python), &opts).unwrap();
    assert_eq!(python.n_fit, 300);
    let subset: Vec<(f64, u8)> = obs
        .iter()
        .filter(|o| o.language == LanguageTag::Python)
        .map(|o| (o.confidence, o.label))
        .collect();
    assert_eq!(python, fit_platt(&subset, None, &opts).unwrap());

    let general = fit_scoped(&obs, &CalibratorScope::General, &opts).unwrap();
    let all: Vec<(f64, u8)> = obs.iter().map(|o| (o.confidence, o.label)).collect();
    assert_eq!(general, fit_platt(&all, None, &opts).unwrap());

    assert_eq!(
        fit_scoped(&obs, &CalibratorScope::Language(LanguageTag::Kotlin), &opts),
        Err(CalibrationError::EmptyScope("language:kotlin".into()))
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn fitting_never_increases_the_objective(
        seed in 0u64..1000,
        n in 5usize..300,
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
        init_a in -5.0f64..5.0,
        init_b in -5.0f64..5.0,
    ) {
        let data = platt_samples(seed, n, a, b);
        let opts = FitOptions::default();
        let objective = PlattObjective::new(&data, &opts).unwrap();
        let init = PlattParams::new(init_a, init_b);
        let fitted = fit_platt(&data, Some(&init), &opts).unwrap();
        prop_assert!(fitted.slope_a.is_finite() && fitted.intercept_b.is_finite());
        prop_assert!(objective.value(fitted.slope_a, fitted.intercept_b) <= objective.value(init_a, init_b) + 1e-12);
    }

    #[test]
    fn positive_slope_preserves_order(a in 0.05f64..5.0, b in -5.0f64..5.0, c1 in 0.001f64..0.99, d in 0.001f64..0.5) {
        let c2 = (c1 + d).min(0.9999);
        prop_assume!(c2 > c1);
        let p = PlattParams::new(a, b);
        prop_assert!(calibrate(&p, c1).unwrap() < calibrate(&p, c2).unwrap());
    }
}
