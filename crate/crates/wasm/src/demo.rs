//! Demo operations as plain Rust functions.

use calibcc_core::adaptive::{init_stream, replay, ReplayConfig};
use calibcc_core::calibration::{fit_platt, FitOptions, PlattParams};
use calibcc_core::labeling::{binarize, label_record, levenshtein, preserved_ratio, LabeledObservation};
use calibcc_core::metrics::{self, BaseRateReference, DEFAULT_PRIOR_COUNT, DEFAULT_PRIOR_MEAN, MAX_BINS};
use calibcc_core::plot::{reliability_svg, series_svg, Series};
use calibcc_core::simgen::{generate, GeneratorSpec, MapShift};
use calibcc_core::StreamKey;
use serde::Serialize;

pub const MAX_RECORDS: usize = 200_000;
const REPLAY_RECORDS: usize = 6_000;
const SHIFT_AT: f64 = 1.0 / 3.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scores {
    pub ece: f64,
    pub brier: f64,
    pub bss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrateResult {
    pub records: usize,
    pub acceptance_rate: f64,
    pub fitted_slope: f64,
    pub fitted_intercept: f64,
    pub converged: bool,
    pub raw: Scores,
    pub calibrated: Scores,
    pub raw_svg: String,
    pub calibrated_svg: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplayResult {
    pub window: usize,
    pub shift_window: usize,
    pub frozen_ece: Vec<f64>,
    pub adaptive_ece: Vec<f64>,
    pub svg: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelResult {
    pub distance: usize,
    pub ratio: f64,
    pub label: u8,
}

fn observations(spec: &GeneratorSpec) -> Result<Vec<LabeledObservation>, String> {
    let generated = generate(spec).map_err(|e| e.to_string())?;
    generated
        .records
        .iter()
        .map(|r| label_record(r).map_err(|e| e.to_string()))
        .collect()
}

fn check_map(slope: f64, intercept: f64) -> Result<(), String> {
    if !(slope.is_finite() && intercept.is_finite() && slope.abs() <= 10.0 && intercept.abs() <= 10.0) {
        return Err("slope and intercept must be finite and within [-10, 10]".into());
    }
    Ok(())
}

fn scores(preds: &[f64], outcomes: &[u8], bins: usize) -> Result<Scores, String> {
    let reference = BaseRateReference::from_mean(DEFAULT_PRIOR_MEAN, DEFAULT_PRIOR_COUNT).map_err(|e| e.to_string())?;
    let r = metrics::report(preds, outcomes, &reference, bins).map_err(|e| e.to_string())?;
    Ok(Scores {
        ece: r.ece,
        brier: r.brier,
        bss: r.bss,
    })
}

pub fn calibrate(
    slope: f64,
    intercept: f64,
    records: usize,
    bins: usize,
    seed: u64,
) -> Result<CalibrateResult, String> {
    check_map(slope, intercept)?;
    if !(100..=MAX_RECORDS).contains(&records) {
        return Err(format!("records must be between 100 and {MAX_RECORDS}"));
    }
    if !(1..=MAX_BINS).contains(&bins) {
        return Err(format!("bins must be between 1 and {MAX_BINS}"));
    }
    let obs = observations(&GeneratorSpec::homogeneous(seed, 1, records, slope, intercept))?;
    let data: Vec<(f64, u8)> = obs.iter().map(|o| (o.confidence, o.label)).collect();
    let outcomes: Vec<u8> = obs.iter().map(|o| o.label).collect();
    let fitted = fit_platt(&data, None, &FitOptions::default()).map_err(|e| e.to_string())?;
    let raw: Vec<f64> = obs.iter().map(|o| o.confidence).collect();
    let calibrated: Vec<f64> = raw.iter().map(|&c| fitted.apply(c)).collect();
    let diagram = |preds: &[f64], title: &str| {
        metrics::bin(preds, &outcomes, bins)
            .map(|b| reliability_svg(&b, title))
            .map_err(|e| e.to_string())
    };
    Ok(CalibrateResult {
        records,
        acceptance_rate: outcomes.iter().map(|&y| f64::from(y)).sum::<f64>() / records as f64,
        fitted_slope: fitted.slope_a,
        fitted_intercept: fitted.intercept_b,
        converged: fitted.converged,
        raw: scores(&raw, &outcomes, bins)?,
        calibrated: scores(&calibrated, &outcomes, bins)?,
        raw_svg: diagram(&raw, "Raw confidence")?,
        calibrated_svg: diagram(&calibrated, "Platt-calibrated")?,
    })
}

pub fn replay_shift(slope: f64, intercept: f64, window: usize, seed: u64) -> Result<ReplayResult, String> {
    check_map(slope, intercept)?;
    if !(20..=REPLAY_RECORDS / 4).contains(&window) {
        return Err(format!("window must be between 20 and {}", REPLAY_RECORDS / 4));
    }
    let mut spec = GeneratorSpec::homogeneous(seed, 1, REPLAY_RECORDS, 1.0, 0.0);
    spec.shift_schedule = vec![MapShift {
        at_fraction: SHIFT_AT,
        slope,
        intercept,
    }];
    let obs = observations(&spec)?;
    let run = |adapt: bool| -> Result<Vec<f64>, String> {
        let state = init_stream(
            StreamKey::User("demo".into()),
            PlattParams::identity(),
            DEFAULT_PRIOR_MEAN,
            DEFAULT_PRIOR_COUNT,
            1000,
        )
        .map_err(|e| e.to_string())?;
        let cfg = ReplayConfig {
            window,
            adapt,
            ..ReplayConfig::default()
        };
        let out = replay(&obs, state, &cfg).map_err(|e| e.to_string())?;
        Ok(out.windows.iter().map(|w| w.metrics.ece).collect())
    };
    let frozen_ece = run(false)?;
    let adaptive_ece = run(true)?;
    let points = |v: &[f64]| v.iter().enumerate().map(|(i, &e)| (i as f64, e)).collect();
    let svg = series_svg(
        &[
            Series {
                name: "frozen".into(),
                points: points(&frozen_ece),
            },
            Series {
                name: "adaptive".into(),
                points: points(&adaptive_ece),
            },
        ],
        "Per-window ECE",
        "window",
        "ECE",
    );
    Ok(ReplayResult {
        window,
        shift_window: (REPLAY_RECORDS as f64 * SHIFT_AT) as usize / window,
        frozen_ece,
        adaptive_ece,
        svg,
    })
}

pub fn label(expected: &str, generated: &str) -> Result<LabelResult, String> {
    let ratio = preserved_ratio(expected, generated).map_err(|e| e.to_string())?;
    Ok(LabelResult {
        distance: levenshtein(expected, generated),
        ratio,
        label: binarize(ratio).map_err(|e| e.to_string())?,
    })
}
