//! Platt scaling.
//!
//! The calibrated probability is `sigmoid(a * logit(conf) + b)`, so
//! `(a, b) = (1, 0)` is the identity map. Note the sign differs from Platt's
//! original `1 / (1 + exp(A f + B))`.
//!
//! Parameters minimize the mean negative log-likelihood plus
//! `l2 / 2 * (a^2 + b^2)` by damped Newton iterations. The problem is convex
//! in two variables, so the exact Hessian is used.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jsonl::{self, JsonlError};
use crate::labeling::LabeledObservation;
use crate::telemetry::{normalize_language, LanguageTag, StreamKey};

/// Clamp applied to confidences before taking the logit.
pub const FEATURE_EPS: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum CalibrationError {
    #[error("confidence {0} outside (0, 1]")]
    ConfidenceOutOfRange(f64),
    #[error("label {0} is not 0 or 1")]
    InvalidLabel(u8),
    #[error("no observations to fit")]
    EmptyData,
    #[error("no observations match scope {0}")]
    EmptyScope(String),
    #[error("invalid calibrator scope `{0}`")]
    InvalidScope(String),
    #[error("initial parameters are not finite")]
    NonFiniteInit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlattParams {
    pub slope_a: f64,
    pub intercept_b: f64,
    pub n_fit: usize,
    pub converged: bool,
    pub final_gradient_norm: f64,
}

impl PlattParams {
    pub fn new(slope_a: f64, intercept_b: f64) -> Self {
        PlattParams {
            slope_a,
            intercept_b,
            n_fit: 0,
            converged: false,
            final_gradient_norm: f64::INFINITY,
        }
    }

    /// The identity calibrator, used as the "uncalibrated" baseline.
    pub fn identity() -> Self {
        Self::new(1.0, 0.0)
    }

    /// Calibrated probability for a confidence already known to be in (0, 1].
    pub fn apply(&self, conf: f64) -> f64 {
        sigmoid(self.slope_a * logit_clamped(conf) + self.intercept_b)
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn logit_clamped(conf: f64) -> f64 {
    let c = conf.clamp(FEATURE_EPS, 1.0 - FEATURE_EPS);
    (c / (1.0 - c)).ln()
}

/// Calibrator input: the logit of the clamped confidence.
pub fn feature(conf: f64) -> Result<f64, CalibrationError> {
    if !(conf > 0.0 && conf <= 1.0) {
        return Err(CalibrationError::ConfidenceOutOfRange(conf));
    }
    Ok(logit_clamped(conf))
}

pub fn calibrate(params: &PlattParams, conf: f64) -> Result<f64, CalibrationError> {
    let z = feature(conf)?;
    Ok(sigmoid(params.slope_a * z + params.intercept_b))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub l2: f64,
    pub max_iter: usize,
    /// Convergence threshold on the gradient infinity norm.
    pub tolerance: f64,
    /// Replace 0/1 targets with Platt's `1/(N-+2)` and `(N++1)/(N++2)`.
    pub target_smoothing: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            l2: 1e-6,
            max_iter: 100,
            tolerance: 1e-10,
            target_smoothing: false,
        }
    }
}

/// Regularized mean negative log-likelihood over precomputed features.
#[derive(Debug, Clone)]
pub struct PlattObjective {
    features: Vec<f64>,
    targets: Vec<f64>,
    l2: f64,
}

impl PlattObjective {
    pub fn new(data: &[(f64, u8)], opts: &FitOptions) -> Result<Self, CalibrationError> {
        if data.is_empty() {
            return Err(CalibrationError::EmptyData);
        }
        let mut features = Vec::with_capacity(data.len());
        for &(conf, label) in data {
            if label > 1 {
                return Err(CalibrationError::InvalidLabel(label));
            }
            features.push(feature(conf)?);
        }
        let positives = data.iter().filter(|(_, y)| *y == 1).count() as f64;
        let negatives = data.len() as f64 - positives;
        let (hi, lo) = if opts.target_smoothing {
            ((positives + 1.0) / (positives + 2.0), 1.0 / (negatives + 2.0))
        } else {
            (1.0, 0.0)
        };
        let targets = data.iter().map(|&(_, y)| if y == 1 { hi } else { lo }).collect();
        Ok(PlattObjective {
            features,
            targets,
            l2: opts.l2,
        })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn value(&self, a: f64, b: f64) -> f64 {
        let sum: f64 = self
            .features
            .iter()
            .zip(&self.targets)
            .map(|(&z, &t)| {
                let s = a * z + b;
                softplus(s) - t * s
            })
            .sum();
        sum / self.len() as f64 + 0.5 * self.l2 * (a * a + b * b)
    }

    pub fn gradient(&self, a: f64, b: f64) -> [f64; 2] {
        let (mut ga, mut gb) = (0.0, 0.0);
        for (&z, &t) in self.features.iter().zip(&self.targets) {
            let r = sigmoid(a * z + b) - t;
            ga += r * z;
            gb += r;
        }
        let n = self.len() as f64;
        [ga / n + self.l2 * a, gb / n + self.l2 * b]
    }

    /// Returns `[[h_aa, h_ab], [h_ab, h_bb]]` flattened as `(h_aa, h_ab, h_bb)`.
    pub fn hessian(&self, a: f64, b: f64) -> (f64, f64, f64) {
        let (mut haa, mut hab, mut hbb) = (0.0, 0.0, 0.0);
        for &z in &self.features {
            let p = sigmoid(a * z + b);
            let w = p * (1.0 - p);
            haa += w * z * z;
            hab += w * z;
            hbb += w;
        }
        let n = self.len() as f64;
        (haa / n + self.l2, hab / n, hbb / n + self.l2)
    }
}

fn inf_norm(g: [f64; 2]) -> f64 {
    g[0].abs().max(g[1].abs())
}

/// Fits a Platt map to `(confidence, label)` pairs, warm-starting from `init`.
///
/// Each Newton step is halved until the objective stops increasing.
/// `converged` is set iff the gradient infinity norm drops below
/// `opts.tolerance` within `opts.max_iter` iterations.
pub fn fit_platt(
    data: &[(f64, u8)],
    init: Option<&PlattParams>,
    opts: &FitOptions,
) -> Result<PlattParams, CalibrationError> {
    let objective = PlattObjective::new(data, opts)?;
    let (mut a, mut b) = init.map_or((0.0, 0.0), |p| (p.slope_a, p.intercept_b));
    if !a.is_finite() || !b.is_finite() {
        return Err(CalibrationError::NonFiniteInit);
    }
    let mut value = objective.value(a, b);
    let mut grad = objective.gradient(a, b);
    let mut converged = inf_norm(grad) < opts.tolerance;
    let mut iter = 0;
    while !converged && iter < opts.max_iter {
        iter += 1;
        let (haa, hab, hbb) = objective.hessian(a, b);
        let det = haa * hbb - hab * hab;
        // l2 > 0 keeps the Hessian positive definite; fall back to a
        // gradient step if it is not.
        let (da, db) = if det > 0.0 && det.is_finite() {
            (
                -(hbb * grad[0] - hab * grad[1]) / det,
                -(haa * grad[1] - hab * grad[0]) / det,
            )
        } else {
            (-grad[0], -grad[1])
        };
        let slack = 4.0 * f64::EPSILON * value.abs();
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let (na, nb) = (a + step * da, b + step * db);
            let nv = objective.value(na, nb);
            if nv.is_finite() && nv <= value + slack {
                accepted = Some((na, nb, nv));
                break;
            }
            step *= 0.5;
        }
        let Some((na, nb, nv)) = accepted else {
            break;
        };
        // Never report a worse objective than we started from.
        if nv > value {
            break;
        }
        a = na;
        b = nb;
        value = nv;
        grad = objective.gradient(a, b);
        converged = inf_norm(grad) < opts.tolerance;
    }
    Ok(PlattParams {
        slope_a: a,
        intercept_b: b,
        n_fit: objective.len(),
        converged,
        final_gradient_norm: inf_norm(grad),
    })
}

/// Which observations a calibrator is trained on.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CalibratorScope {
    General,
    Language(LanguageTag),
    Stream(StreamKey),
}

impl CalibratorScope {
    pub fn matches(&self, obs: &LabeledObservation) -> bool {
        match self {
            CalibratorScope::General => true,
            CalibratorScope::Language(tag) => &obs.language == tag,
            CalibratorScope::Stream(key) => key.matches(&obs.user, obs.project.as_deref()),
        }
    }
}

impl fmt::Display for CalibratorScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CalibratorScope::General => f.write_str("general"),
            CalibratorScope::Language(tag) => write!(f, "language:{tag}"),
            CalibratorScope::Stream(key) => write!(f, "stream:{key}"),
        }
    }
}

impl FromStr for CalibratorScope {
    type Err = CalibrationError;

    /// Inverse of `Display`. Stream keys split on the first `/`, so user ids
    /// containing `/` do not round-trip.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "general" {
            return Ok(CalibratorScope::General);
        }
        if let Some(lang) = s.strip_prefix("language:") {
            return Ok(CalibratorScope::Language(normalize_language(lang)));
        }
        if let Some(key) = s.strip_prefix("stream:") {
            let key = match key.split_once('/') {
                _ if key == "*" => StreamKey::All,
                Some((u, p)) => StreamKey::UserProject(u.into(), p.into()),
                None => StreamKey::User(key.into()),
            };
            return Ok(CalibratorScope::Stream(key));
        }
        Err(CalibrationError::InvalidScope(s.to_string()))
    }
}

pub fn fit_scoped(
    observations: &[LabeledObservation],
    scope: &CalibratorScope,
    opts: &FitOptions,
) -> Result<PlattParams, CalibrationError> {
    let data: Vec<(f64, u8)> = observations
        .iter()
        .filter(|o| scope.matches(o))
        .map(|o| (o.confidence, o.label))
        .collect();
    if data.is_empty() {
        return Err(CalibrationError::EmptyScope(scope.to_string()));
    }
    fit_platt(&data, None, opts)
}

/// One row of the calibrator persistence file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibratorRecord {
    pub scope: String,
    pub slope_a: f64,
    pub intercept_b: f64,
    pub n_fit: usize,
    pub converged: bool,
}

impl CalibratorRecord {
    pub fn new(scope: &CalibratorScope, params: &PlattParams) -> Self {
        CalibratorRecord {
            scope: scope.to_string(),
            slope_a: params.slope_a,
            intercept_b: params.intercept_b,
            n_fit: params.n_fit,
            converged: params.converged,
        }
    }

    pub fn scope(&self) -> Result<CalibratorScope, CalibrationError> {
        self.scope.parse()
    }

    pub fn params(&self) -> PlattParams {
        PlattParams {
            n_fit: self.n_fit,
            converged: self.converged,
            ..PlattParams::new(self.slope_a, self.intercept_b)
        }
    }
}

pub fn write_calibrators<W: Write>(out: W, rows: &[CalibratorRecord]) -> std::io::Result<usize> {
    jsonl::write_lines(out, rows)
}

pub fn read_calibrators<R: BufRead>(reader: R) -> Result<Vec<CalibratorRecord>, JsonlError> {
    jsonl::read_lines(reader)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn feature_values() {
        assert_eq!(feature(0.5).unwrap(), 0.0);
        // ln((1 - 1e-6) / 1e-6)
        assert!((feature(1.0).unwrap() - 13.815509557963773).abs() < 1e-9);
        assert!((feature(0.2689414).unwrap() + 1.0).abs() < 1e-6);
        assert!(feature(0.0).is_err());
        assert!(feature(1.5).is_err());
    }

    #[test]
    fn calibrate_values() {
        let identity = PlattParams::identity();
        assert!((calibrate(&identity, 0.73).unwrap() - 0.73).abs() < 1e-5);
        assert_eq!(calibrate(&PlattParams::new(0.0, 0.0), 0.91).unwrap(), 0.5);
        let p = calibrate(&PlattParams::new(2.0, -1.0), 0.5).unwrap();
        assert!((p - 0.2689414213699951).abs() < 1e-12);
    }

    #[test]
    fn balanced_labels_at_midpoint() {
        let data: Vec<_> = (0..100).map(|i| (0.5, (i % 2) as u8)).collect();
        let p = fit_platt(&data, None, &FitOptions::default()).unwrap();
        assert!((p.apply(0.5) - 0.5).abs() < 1e-6);
        assert!(p.converged);
    }

    #[test]
    fn all_positive_labels_stay_finite() {
        let data: Vec<_> = (1..50).map(|i| (i as f64 / 50.0, 1u8)).collect();
        let p = fit_platt(&data, None, &FitOptions::default()).unwrap();
        assert!(p.slope_a.is_finite() && p.intercept_b.is_finite());
        assert!(p.slope_a >= 0.0);
        for &(c, _) in &data {
            assert!(p.apply(c) > 0.5);
        }
        let mut last = 0.0;
        for &(c, _) in &data {
            let v = p.apply(c);
            assert!(v >= last);
            last = v;
        }
    }

    #[test]
    fn rejects_bad_input() {
        let opts = FitOptions::default();
        assert_eq!(fit_platt(&[], None, &opts), Err(CalibrationError::EmptyData));
        assert_eq!(
            fit_platt(&[(0.5, 2)], None, &opts),
            Err(CalibrationError::InvalidLabel(2))
        );
        assert!(fit_platt(&[(0.0, 1)], None, &opts).is_err());
        let nan = PlattParams::new(f64::NAN, 0.0);
        assert_eq!(
            fit_platt(&[(0.5, 1)], Some(&nan), &opts),
            Err(CalibrationError::NonFiniteInit)
        );
    }

    #[test]
    fn target_smoothing_pulls_toward_half() {
        let data: Vec<_> = (0..20).map(|i| (0.3 + 0.02 * i as f64, 1u8)).collect();
        let sharp = fit_platt(&data, None, &FitOptions::default()).unwrap();
        let smooth = fit_platt(
            &data,
            None,
            &FitOptions {
                target_smoothing: true,
                ..FitOptions::default()
            },
        )
        .unwrap();
        assert!(smooth.apply(0.5) < sharp.apply(0.5));
        assert!((smooth.apply(0.5) - 21.0 / 22.0).abs() < 0.05);
    }

    #[test]
    fn scope_display_round_trip() {
        for scope in [
            CalibratorScope::General,
            CalibratorScope::Language(LanguageTag::Java),
            CalibratorScope::Language(LanguageTag::Other("rust".into())),
            CalibratorScope::Stream(StreamKey::All),
            CalibratorScope::Stream(StreamKey::User("u1".into())),
            CalibratorScope::Stream(StreamKey::UserProject("u1".into(), "p".into())),
        ] {
            assert_eq!(scope.to_string().parse::<CalibratorScope>().unwrap(), scope);
        }
        assert!("bogus".parse::<CalibratorScope>().is_err());
    }
}
