mod common;

use std::collections::BTreeMap;

use calibcc_core::calibration::{fit_platt, FitOptions};
use calibcc_core::simgen::{
    generate, heterogeneous_spec, paper_analog_spec, GeneratorSpec, LanguageOffsets, MapShift, TrueLink,
};
use calibcc_core::telemetry::{InteractionRecord, LanguageTag};
use common::*;

fn conf_and_outcome(records: &[InteractionRecord]) -> (Vec<f64>, Vec<u8>) {
    records
        .iter()
        .map(|r| (r.raw_confidence.unwrap(), r.outcome.unwrap()))
        .unzip()
}

fn offset(o: &LanguageOffsets, tag: &LanguageTag) -> f64 {
    match tag {
        LanguageTag::Java => o.java,
        LanguageTag::Python => o.python,
        LanguageTag::Kotlin => o.kotlin,
        LanguageTag::Other(_) => 0.0,
    }
}

#[test]
fn same_seed_gives_identical_serialized_output() {
    let spec = GeneratorSpec {
        records_per_stream: calibcc_core::simgen::CountRange::new(10, 60),
        projects_per_user: calibcc_core::simgen::CountRange::new(1, 3),
        ..GeneratorSpec::homogeneous(99, 20, 10, 1.3, -0.4)
    };
    let a = generate(&spec).unwrap();
    let b = generate(&spec).unwrap();
    let lines =
        |g: &calibcc_core::simgen::Generated| g.records.iter().map(|r| r.to_line()).collect::<Vec<_>>().join("\n");
    assert_eq!(lines(&a), lines(&b));
    assert_eq!(a.truth, b.truth);

    let other = generate(&GeneratorSpec { seed: 100, ..spec }).unwrap();
    assert_ne!(lines(&a), lines(&other));
}

#[test]
fn identity_map_is_calibrated() {
    let g = generate(&GeneratorSpec::homogeneous(1, 100, 1000, 1.0, 0.0)).unwrap();
    let (conf, y) = conf_and_outcome(&g.records);
    assert_eq!(conf.len(), 100_000);
    let ece = oracle_ece(&conf, &y, 10);
    assert!(ece < 0.02, "ece={ece}");
}

#[test]
fn population_rate_matches_quadrature() {
    let spec = GeneratorSpec::homogeneous(2, 100, 1000, 2.0, -1.0);
    let g = generate(&spec).unwrap();
    let expected = expected_rate(2.0, -1.0, spec.confidence_model.mean, spec.confidence_model.std);
    let realized = g.truth.realized_rate();
    assert!(
        (realized - expected).abs() < 0.01,
        "realized={realized} expected={expected}"
    );
    let direct = g.records.iter().map(|r| f64::from(r.outcome.unwrap())).sum::<f64>() / g.records.len() as f64;
    assert!((direct - realized).abs() < 1e-12);
}

#[test]
fn analog_matches_targets() {
    let g = generate(&paper_analog_spec()).unwrap();
    let n = g.records.len() as f64;
    assert!((90_000.0..=110_000.0).contains(&n), "n={n}");
    for (tag, share) in [
        (LanguageTag::Java, 0.482),
        (LanguageTag::Python, 0.382),
        (LanguageTag::Kotlin, 0.136),
    ] {
        let observed = g.records.iter().filter(|r| r.language == tag).count() as f64 / n;
        assert!((observed - share).abs() < 0.01, "{tag:?}: {observed}");
    }
    let (conf, y) = conf_and_outcome(&g.records);
    let rate = y.iter().map(|&v| f64::from(v)).sum::<f64>() / n;
    assert!((rate - 0.26).abs() < 0.01, "rate={rate}");
    let ece = oracle_ece(&conf, &y, 10);
    assert!((ece - 0.30).abs() < 0.03, "ece={ece}");
}

/// Per confidence bin, the accepted count must lie within three binomial
/// standard deviations of the sum of true acceptance probabilities.
#[test]
fn conditional_law_holds_per_bin() {
    let spec = paper_analog_spec();
    let g = generate(&spec).unwrap();
    let maps: BTreeMap<&str, (f64, f64)> = g
        .truth
        .users
        .iter()
        .map(|u| (u.user_id.as_str(), (u.slope, u.intercept)))
        .collect();
    let bins = 10;
    let mut accepted = vec![0.0; bins];
    let mut mean = vec![0.0; bins];
    let mut var = vec![0.0; bins];
    for r in &g.records {
        let conf = r.raw_confidence.unwrap();
        let (a, b) = maps[r.user_id.as_str()];
        let z = (conf / (1.0 - conf)).ln();
        let p = sigmoid(a * z + b + offset(&spec.language_offsets, &r.language));
        let m = oracle_bin_of(conf, bins);
        accepted[m] += f64::from(r.outcome.unwrap());
        mean[m] += p;
        var[m] += p * (1.0 - p);
    }
    for m in 0..bins {
        if var[m] > 0.0 {
            let z = (accepted[m] - mean[m]) / var[m].sqrt();
            assert!(z.abs() < 3.0, "bin {m}: z={z}");
        }
    }
}

#[test]
fn fit_recovers_each_stream_map() {
    let g = generate(&GeneratorSpec {
        user_map_prior: calibcc_core::simgen::MapPrior {
            slope_mean: 1.2,
            slope_std: 0.4,
            intercept_mean: -0.8,
            intercept_std: 0.6,
        },
        ..GeneratorSpec::homogeneous(31, 3, 10_000, 0.0, 0.0)
    })
    .unwrap();
    for row in &g.truth.ledger {
        let user = row.stream_key.split('/').next().unwrap();
        let data: Vec<(f64, u8)> = g
            .records
            .iter()
            .filter(|r| r.user_id == user)
            .map(|r| (r.raw_confidence.unwrap(), r.outcome.unwrap()))
            .collect();
        assert_eq!(data.len(), 10_000);
        let p = fit_platt(&data, None, &FitOptions::default()).unwrap();
        assert!((p.slope_a - row.true_a).abs() < 0.1, "{row:?} {p:?}");
        assert!((p.intercept_b - row.true_b).abs() < 0.1, "{row:?} {p:?}");
    }
}

#[test]
fn timestamps_strictly_increase_per_stream() {
    for spec in [paper_analog_spec(), heterogeneous_spec()] {
        let spec = GeneratorSpec { n_users: 10, ..spec };
        let g = generate(&spec).unwrap();
        let mut last: BTreeMap<(String, Option<String>), i64> = BTreeMap::new();
        for r in &g.records {
            let key = (r.user_id.clone(), r.project_id.clone());
            if let Some(prev) = last.insert(key, r.timestamp) {
                assert!(r.timestamp > prev);
            }
        }
        assert_eq!(g.truth.stream_sizes.iter().sum::<usize>(), g.records.len());
    }
}

#[test]
fn shift_changes_the_law_after_its_fraction() {
    let spec = GeneratorSpec {
        shift_schedule: vec![MapShift {
            at_fraction: 0.5,
            slope: 1.0,
            intercept: 2.0,
        }],
        ..GeneratorSpec::homogeneous(4, 1, 20_000, 1.0, -2.0)
    };
    let g = generate(&spec).unwrap();
    let (_, y) = conf_and_outcome(&g.records);
    let rate = |s: &[u8]| s.iter().map(|&v| f64::from(v)).sum::<f64>() / s.len() as f64;
    let before = rate(&y[..10_000]);
    let after = rate(&y[10_000..]);
    assert!((before - expected_rate(1.0, -2.0, 0.0, 1.5)).abs() < 0.02);
    assert!((after - expected_rate(1.0, 2.0, 0.0, 1.5)).abs() < 0.02);
    assert_eq!(g.truth.ledger[0].true_b, -2.0);
}

#[test]
fn misspecified_link_leaves_residual_error_after_fitting() {
    let spec = GeneratorSpec {
        link: TrueLink::PiecewiseLinear {
            knots: vec![(0.0, 0.3), (0.4, 0.05), (0.6, 0.6), (1.0, 0.2)],
        },
        ..GeneratorSpec::homogeneous(5, 10, 5000, 1.0, 0.0)
    };
    let g = generate(&spec).unwrap();
    let (conf, y) = conf_and_outcome(&g.records);
    let data: Vec<(f64, u8)> = conf.iter().copied().zip(y.iter().copied()).collect();
    let p = fit_platt(&data, None, &FitOptions::default()).unwrap();
    let preds: Vec<f64> = conf.iter().map(|&c| p.apply(c)).collect();
    assert!(oracle_ece(&preds, &y, 10) > 0.05);
}

#[test]
fn invalid_specs_are_rejected() {
    let good = GeneratorSpec::homogeneous(0, 2, 10, 1.0, 0.0);
    let mut bad = good.clone();
    bad.language_mix.java = 0.9;
    assert!(generate(&bad).is_err());
    let mut bad = good.clone();
    bad.n_users = 0;
    assert!(generate(&bad).is_err());
    let mut bad = good.clone();
    bad.confidence_model.std = 0.0;
    assert!(generate(&bad).is_err());
    let mut bad = good;
    bad.records_per_stream = calibcc_core::simgen::CountRange::new(5, 4);
    assert!(generate(&bad).is_err());
}
