//! Binned reliability, ECE/MCE, Brier score and Brier skill score.
//!
//! Bins are `M` equal-width intervals `[m/M, (m+1)/M)` over `[0, 1]`, with the
//! last bin closed above so a prediction of exactly 1.0 lands in bin `M-1`.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_BINS: usize = 10;
pub const MAX_BINS: usize = 100;
/// Pseudo-count of the base-rate prior.
pub const DEFAULT_PRIOR_COUNT: f64 = 50.0;
/// Overall acceptance rate of the logged completions.
pub const DEFAULT_PRIOR_MEAN: f64 = 0.26;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("length mismatch: {0} predictions vs {1} outcomes")]
    LengthMismatch(usize, usize),
    #[error("no predictions")]
    Empty,
    #[error("bin count {0} outside 1..={max}", max = MAX_BINS)]
    InvalidBinCount(usize),
    #[error("prediction {0} outside [0, 1]")]
    PredictionOutOfRange(f64),
    #[error("outcome {0} is not 0 or 1")]
    InvalidOutcome(u8),
    #[error("reference Brier score is zero; the reference forecast is already perfect")]
    PerfectReference,
    #[error("invalid base-rate reference (alpha={alpha}, beta={beta})")]
    InvalidReference { alpha: f64, beta: f64 },
    #[error("need at least two points for a correlation")]
    TooFewPoints,
}

fn check_pairs(preds: &[f64], outcomes: &[u8]) -> Result<(), MetricError> {
    if preds.len() != outcomes.len() {
        return Err(MetricError::LengthMismatch(preds.len(), outcomes.len()));
    }
    if preds.is_empty() {
        return Err(MetricError::Empty);
    }
    if let Some(&p) = preds.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(MetricError::PredictionOutOfRange(p));
    }
    if let Some(&y) = outcomes.iter().find(|y| **y > 1) {
        return Err(MetricError::InvalidOutcome(y));
    }
    Ok(())
}

/// Per-bin accumulator. Sums rather than means are stored so that merging
/// is exact and associative.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BinStats {
    pub count: usize,
    pub sum_confidence: f64,
    pub sum_outcome: f64,
}

impl BinStats {
    pub fn mean_confidence(&self) -> Option<f64> {
        (self.count > 0).then(|| self.sum_confidence / self.count as f64)
    }

    pub fn mean_outcome(&self) -> Option<f64> {
        (self.count > 0).then(|| self.sum_outcome / self.count as f64)
    }

    fn gap(&self) -> Option<f64> {
        (self.count > 0).then(|| (self.sum_outcome - self.sum_confidence).abs() / self.count as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinnedReliability {
    pub bins: Vec<BinStats>,
    pub total: usize,
}

/// Index of the bin holding `p`, using the same edges `m / M` as
/// [`BinnedReliability::edges`].
pub fn bin_index(p: f64, bins: usize) -> usize {
    let m = bins as f64;
    let mut idx = ((p * m).floor().max(0.0) as usize).min(bins - 1);
    // Correct float drift in `p * m` against the exact edge values.
    if idx > 0 && p < idx as f64 / m {
        idx -= 1;
    } else if idx + 1 < bins && p >= (idx + 1) as f64 / m {
        idx += 1;
    }
    idx
}

impl BinnedReliability {
    pub fn empty(bins: usize) -> Result<Self, MetricError> {
        if bins == 0 || bins > MAX_BINS {
            return Err(MetricError::InvalidBinCount(bins));
        }
        Ok(BinnedReliability {
            bins: vec![BinStats::default(); bins],
            total: 0,
        })
    }

    pub fn bin_count(&self) -> usize {
        self.bins.len()
    }

    /// `(low, high)` edges of bin `m`.
    pub fn edges(&self, m: usize) -> (f64, f64) {
        let n = self.bins.len() as f64;
        (m as f64 / n, (m + 1) as f64 / n)
    }

    pub fn push(&mut self, pred: f64, outcome: u8) {
        let idx = bin_index(pred, self.bins.len());
        let bin = &mut self.bins[idx];
        bin.count += 1;
        bin.sum_confidence += pred;
        bin.sum_outcome += f64::from(outcome);
        self.total += 1;
    }

    /// Combines two binnings with the same bin count.
    pub fn merge(&self, other: &BinnedReliability) -> Result<BinnedReliability, MetricError> {
        if self.bins.len() != other.bins.len() {
            return Err(MetricError::LengthMismatch(self.bins.len(), other.bins.len()));
        }
        let bins = self
            .bins
            .iter()
            .zip(&other.bins)
            .map(|(a, b)| BinStats {
                count: a.count + b.count,
                sum_confidence: a.sum_confidence + b.sum_confidence,
                sum_outcome: a.sum_outcome + b.sum_outcome,
            })
            .collect();
        Ok(BinnedReliability {
            bins,
            total: self.total + other.total,
        })
    }

    pub fn nonempty(&self) -> impl Iterator<Item = (usize, &BinStats)> {
        self.bins.iter().enumerate().filter(|(_, b)| b.count > 0)
    }

    /// Writes the reliability-diagram CSV, one row per nonempty bin.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "bin_low,bin_high,count,mean_confidence,mean_outcome")?;
        for (m, b) in self.nonempty() {
            let (lo, hi) = self.edges(m);
            writeln!(
                out,
                "{lo},{hi},{},{},{}",
                b.count,
                b.sum_confidence / b.count as f64,
                b.sum_outcome / b.count as f64
            )?;
        }
        Ok(())
    }
}

pub fn bin(preds: &[f64], outcomes: &[u8], bins: usize) -> Result<BinnedReliability, MetricError> {
    check_pairs(preds, outcomes)?;
    let mut binned = BinnedReliability::empty(bins)?;
    for (&p, &y) in preds.iter().zip(outcomes) {
        binned.push(p, y);
    }
    Ok(binned)
}

/// Expected calibration error. Empty bins contribute zero.
pub fn ece(b: &BinnedReliability) -> f64 {
    if b.total == 0 {
        return 0.0;
    }
    b.bins
        .iter()
        .map(|bin| (bin.sum_outcome - bin.sum_confidence).abs())
        .sum::<f64>()
        / b.total as f64
}

/// Maximum calibration error over nonempty bins.
pub fn mce(b: &BinnedReliability) -> f64 {
    b.bins.iter().filter_map(BinStats::gap).fold(0.0, f64::max)
}

pub fn brier(preds: &[f64], outcomes: &[u8]) -> Result<f64, MetricError> {
    check_pairs(preds, outcomes)?;
    let sum: f64 = preds
        .iter()
        .zip(outcomes)
        .map(|(&p, &y)| (p - f64::from(y)).powi(2))
        .sum();
    Ok(sum / preds.len() as f64)
}

/// Brier skill score `1 - bs_x / bs_y`; positive when `x` beats `y`.
pub fn bss(bs_x: f64, bs_y: f64) -> Result<f64, MetricError> {
    if bs_y == 0.0 {
        return Err(MetricError::PerfectReference);
    }
    Ok(1.0 - bs_x / bs_y)
}

/// Beta posterior over the acceptance rate, used as the naive reference
/// forecast in the skill score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaseRateReference {
    pub alpha: f64,
    pub beta: f64,
}

impl BaseRateReference {
    pub fn new(alpha: f64, beta: f64) -> Result<Self, MetricError> {
        if !(alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite()) {
            return Err(MetricError::InvalidReference { alpha, beta });
        }
        Ok(BaseRateReference { alpha, beta })
    }

    /// Prior with the given mean and total pseudo-count.
    pub fn from_mean(mean: f64, pseudo_count: f64) -> Result<Self, MetricError> {
        Self::new(mean * pseudo_count, (1.0 - mean) * pseudo_count)
    }

    pub fn predict(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }

    pub fn update(&self, outcomes: &[u8]) -> Self {
        let accepted = outcomes.iter().map(|&y| f64::from(y)).sum::<f64>();
        BaseRateReference {
            alpha: self.alpha + accepted,
            beta: self.beta + (outcomes.len() as f64 - accepted),
        }
    }
}

impl Default for BaseRateReference {
    fn default() -> Self {
        Self::from_mean(DEFAULT_PRIOR_MEAN, DEFAULT_PRIOR_COUNT).expect("default prior is valid")
    }
}

pub fn reference_predict(reference: &BaseRateReference) -> f64 {
    reference.predict()
}

pub fn reference_update(reference: &BaseRateReference, outcomes: &[u8]) -> BaseRateReference {
    reference.update(outcomes)
}

/// Acceptance rates per language, used to seed language-scoped references.
pub fn language_prior_mean(language: &crate::telemetry::LanguageTag) -> f64 {
    use crate::telemetry::LanguageTag;
    match language {
        LanguageTag::Java => 0.2809,
        LanguageTag::Python => 0.2429,
        LanguageTag::Kotlin => 0.2344,
        LanguageTag::Other(_) => DEFAULT_PRIOR_MEAN,
    }
}

/// Pearson (point-biserial) correlation; `None` when either side is constant.
pub fn correlation(preds: &[f64], outcomes: &[u8]) -> Result<Option<f64>, MetricError> {
    if preds.len() != outcomes.len() {
        return Err(MetricError::LengthMismatch(preds.len(), outcomes.len()));
    }
    if preds.len() < 2 {
        return Err(MetricError::TooFewPoints);
    }
    let n = preds.len() as f64;
    let mean_p = preds.iter().sum::<f64>() / n;
    let mean_y = outcomes.iter().map(|&y| f64::from(y)).sum::<f64>() / n;
    let (mut cov, mut var_p, mut var_y) = (0.0, 0.0, 0.0);
    for (&p, &y) in preds.iter().zip(outcomes) {
        let dp = p - mean_p;
        let dy = f64::from(y) - mean_y;
        cov += dp * dy;
        var_p += dp * dp;
        var_y += dy * dy;
    }
    if var_p == 0.0 || var_y == 0.0 {
        return Ok(None);
    }
    Ok(Some((cov / (var_p.sqrt() * var_y.sqrt())).clamp(-1.0, 1.0)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub ece: f64,
    pub brier: f64,
    pub bss: f64,
    pub mce: f64,
    pub correlation: Option<f64>,
    pub n: usize,
}

/// All metrics for one prediction set. The skill score compares against the
/// constant forecast `reference.predict()`.
pub fn report(
    preds: &[f64],
    outcomes: &[u8],
    reference: &BaseRateReference,
    bins: usize,
) -> Result<MetricReport, MetricError> {
    let binned = bin(preds, outcomes, bins)?;
    let bs = brier(preds, outcomes)?;
    let r = reference.predict();
    let reference_bs = outcomes.iter().map(|&y| (r - f64::from(y)).powi(2)).sum::<f64>() / outcomes.len() as f64;
    let correlation = if preds.len() >= 2 {
        correlation(preds, outcomes)?
    } else {
        None
    };
    Ok(MetricReport {
        ece: ece(&binned),
        brier: bs,
        bss: bss(bs, reference_bs)?,
        mce: mce(&binned),
        correlation,
        n: preds.len(),
    })
}
