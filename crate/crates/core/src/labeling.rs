//! Confidence and outcome labels for logged completions.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::telemetry::{InteractionRecord, LanguageTag};

/// Ratios at or above this value count as accepted.
pub const ACCEPT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error, PartialEq)]
pub enum LabelError {
    #[error("token log-probability list is empty")]
    EmptyTokens,
    #[error("token log-probability {0} is not finite and <= 0")]
    InvalidLogprob(f64),
    #[error("preserved ratio undefined: both strings are empty")]
    UndefinedRatio,
    #[error("ratio {0} outside [0, 1]")]
    RatioOutOfRange(f64),
    #[error("record {0} has no confidence evidence")]
    NoConfidence(String),
    #[error("record {0} has no outcome evidence")]
    NoOutcome(String),
}

/// A `(confidence, label)` pair with the keys needed to scope and replay it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledObservation {
    pub confidence: f64,
    pub ratio: f64,
    pub label: u8,
    pub user: String,
    pub project: Option<String>,
    pub language: LanguageTag,
    pub timestamp: i64,
}

/// Geometric mean of token probabilities, `exp(mean(logprobs))`.
pub fn sequence_confidence(token_logprobs: &[f64]) -> Result<f64, LabelError> {
    if token_logprobs.is_empty() {
        return Err(LabelError::EmptyTokens);
    }
    if let Some(&bad) = token_logprobs.iter().find(|lp| !lp.is_finite() || **lp > 0.0) {
        return Err(LabelError::InvalidLogprob(bad));
    }
    let mean = token_logprobs.iter().sum::<f64>() / token_logprobs.len() as f64;
    // A long list of tiny probabilities can underflow to zero.
    Ok(mean.exp().clamp(f64::MIN_POSITIVE, 1.0))
}

/// Character-level edit distance with unit-cost insert, delete and substitute.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let substitute = prev[j] + usize::from(ca != cb);
            cur[j + 1] = substitute.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// `1 - L(expected, generated) / max(|expected|, |generated|)` over characters.
pub fn preserved_ratio(expected: &str, generated: &str) -> Result<f64, LabelError> {
    let longest = expected.chars().count().max(generated.chars().count());
    if longest == 0 {
        return Err(LabelError::UndefinedRatio);
    }
    Ok(1.0 - levenshtein(expected, generated) as f64 / longest as f64)
}

pub fn binarize(ratio: f64) -> Result<u8, LabelError> {
    if !(0.0..=1.0).contains(&ratio) {
        return Err(LabelError::RatioOutOfRange(ratio));
    }
    Ok(u8::from(ratio >= ACCEPT_THRESHOLD))
}

/// Resolves a record's confidence, ratio and label.
///
/// Explicit fields take precedence over derived ones. When only `outcome` is
/// logged, the ratio is recorded as the outcome itself (0.0 or 1.0).
pub fn label_record(r: &InteractionRecord) -> Result<LabeledObservation, LabelError> {
    let confidence = match (r.raw_confidence, &r.token_logprobs) {
        (Some(c), _) => c,
        (None, Some(lps)) => sequence_confidence(lps)?,
        (None, None) => return Err(LabelError::NoConfidence(r.record_id.clone())),
    };
    let ratio = match (r.preserved_ratio, &r.final_text, r.outcome) {
        (Some(ratio), _, _) => ratio,
        (None, Some(kept), _) => preserved_ratio(kept, &r.suggestion_text)?,
        (None, None, Some(o)) => f64::from(o),
        (None, None, None) => return Err(LabelError::NoOutcome(r.record_id.clone())),
    };
    let label = match r.outcome {
        Some(o) => o,
        None => binarize(ratio)?,
    };
    Ok(LabeledObservation {
        confidence,
        ratio,
        label,
        user: r.user_id.clone(),
        project: r.project_id.clone(),
        language: r.language.clone(),
        timestamp: r.timestamp,
    })
}
