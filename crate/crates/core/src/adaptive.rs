//! Per-stream online calibration with progressive validation.
//!
//! A stream is cut into windows of `k` observations advanced by `stride`.
//! Every window is first scored with the calibrator and base-rate reference
//! as they stood before any observation in the window was seen, then its
//! new observations are absorbed: they enter a bounded history buffer,
//! update the Beta reference, and the calibrator is refit on the history,
//! warm-started from its previous parameters.
//!
//! With overlapping windows (`stride < k`) the scoring snapshot is the latest
//! one trained strictly on observations before the window start.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibration::{fit_platt, CalibrationError, FitOptions, PlattParams};
use crate::labeling::LabeledObservation;
use crate::metrics::{self, BaseRateReference, MetricError, MetricReport};
use crate::telemetry::StreamKey;

pub const DEFAULT_WINDOW: usize = 100;
pub const DEFAULT_MIN_EVAL: usize = 20;
pub const DEFAULT_HISTORY: usize = 1000;

#[derive(Debug, Error, PartialEq)]
pub enum ReplayError {
    #[error("observation {index} is earlier than its predecessor")]
    Unordered { index: usize },
    #[error("window size and stride must be at least 1")]
    InvalidWindow,
    #[error("history capacity must be at least 1")]
    InvalidHistory,
    #[error("no evaluated windows to aggregate")]
    NothingToAggregate,
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// Order of the two per-window phases. Only `EvaluateThenAdapt` is valid
/// progressive validation; the other exists as a negative control for
/// [`no_lookahead_check`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Schedule {
    #[default]
    EvaluateThenAdapt,
    AdaptThenEvaluate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplayConfig {
    pub window: usize,
    /// Defaults to `window` (tumbling windows) when `None`.
    pub stride: Option<usize>,
    pub min_eval: usize,
    pub bins: usize,
    /// Refit the calibrator after each window. The reference is updated
    /// either way.
    pub adapt: bool,
    pub fit: FitOptions,
    pub schedule: Schedule,
}

impl Default for ReplayConfig {
    fn default() -> Self {
        ReplayConfig {
            window: DEFAULT_WINDOW,
            stride: None,
            min_eval: DEFAULT_MIN_EVAL,
            bins: metrics::DEFAULT_BINS,
            adapt: true,
            fit: FitOptions::default(),
            schedule: Schedule::EvaluateThenAdapt,
        }
    }
}

impl ReplayConfig {
    pub fn stride(&self) -> usize {
        self.stride.unwrap_or(self.window)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamState {
    pub key: StreamKey,
    pub params: PlattParams,
    pub history: VecDeque<(f64, u8)>,
    pub capacity: usize,
    pub reference: BaseRateReference,
    /// Observations absorbed so far.
    pub observed: usize,
}

impl StreamState {
    fn absorb(&mut self, obs: &[LabeledObservation]) {
        for o in obs {
            if self.history.len() == self.capacity {
                self.history.pop_front();
            }
            self.history.push_back((o.confidence, o.label));
        }
        let outcomes: Vec<u8> = obs.iter().map(|o| o.label).collect();
        self.reference = self.reference.update(&outcomes);
        self.observed += obs.len();
    }
}

pub fn init_stream(
    key: StreamKey,
    init_params: PlattParams,
    ref_mean: f64,
    pseudo_count: f64,
    capacity: usize,
) -> Result<StreamState, ReplayError> {
    if !init_params.slope_a.is_finite() || !init_params.intercept_b.is_finite() {
        return Err(CalibrationError::NonFiniteInit.into());
    }
    if capacity == 0 {
        return Err(ReplayError::InvalidHistory);
    }
    Ok(StreamState {
        key,
        params: init_params,
        history: VecDeque::with_capacity(capacity.min(4096)),
        capacity,
        reference: BaseRateReference::from_mean(ref_mean, pseudo_count)?,
        observed: 0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowMetrics {
    pub window_index: usize,
    pub t_end: i64,
    pub metrics: MetricReport,
    pub n_window: usize,
}

/// Which data the scoring snapshot of one window had seen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub window_index: usize,
    pub window_start: usize,
    pub window_end: usize,
    /// Number of leading stream observations the parameters were fit on.
    pub params_through: usize,
    pub reference_through: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayOutcome {
    pub windows: Vec<WindowMetrics>,
    pub audit: Vec<AuditEntry>,
    pub state: StreamState,
}

/// True iff no window was scored by a snapshot that had seen any of its
/// observations.
pub fn no_lookahead_check(audit: &[AuditEntry]) -> bool {
    audit
        .iter()
        .all(|e| e.params_through <= e.window_start && e.reference_through <= e.window_start)
}

#[derive(Debug, Clone, Copy)]
struct Snapshot {
    through: usize,
    params: PlattParams,
    reference: BaseRateReference,
}

pub fn replay(
    stream: &[LabeledObservation],
    mut state: StreamState,
    cfg: &ReplayConfig,
) -> Result<ReplayOutcome, ReplayError> {
    if cfg.window == 0 || cfg.stride() == 0 {
        return Err(ReplayError::InvalidWindow);
    }
    if let Some(i) = (1..stream.len()).find(|&i| stream[i].timestamp < stream[i - 1].timestamp) {
        return Err(ReplayError::Unordered { index: i });
    }
    let stride = cfg.stride();
    let base = state.observed;
    let mut snapshots: VecDeque<Snapshot> = VecDeque::from([Snapshot {
        through: 0,
        params: state.params,
        reference: state.reference,
    }]);
    let mut windows = Vec::new();
    let mut audit = Vec::new();
    let mut absorbed = 0;
    let mut start = 0;
    let mut window_index = 0;

    while start < stream.len() {
        let end = (start + cfg.window).min(stream.len());
        let slice = &stream[start..end];
        let evaluate = slice.len() == cfg.window || slice.len() >= cfg.min_eval;

        if cfg.schedule == Schedule::AdaptThenEvaluate {
            absorb_until(stream, &mut state, &mut absorbed, end, base, cfg, &mut snapshots)?;
        }
        if evaluate {
            let snap = match cfg.schedule {
                Schedule::EvaluateThenAdapt => snapshots.iter().rev().find(|s| s.through <= start),
                Schedule::AdaptThenEvaluate => snapshots.back(),
            }
            .copied()
            .expect("a snapshot predating the window");
            let preds: Vec<f64> = slice.iter().map(|o| snap.params.apply(o.confidence)).collect();
            let outcomes: Vec<u8> = slice.iter().map(|o| o.label).collect();
            windows.push(WindowMetrics {
                window_index,
                t_end: slice.last().expect("nonempty window").timestamp,
                metrics: metrics::report(&preds, &outcomes, &snap.reference, cfg.bins)?,
                n_window: slice.len(),
            });
            audit.push(AuditEntry {
                window_index,
                window_start: start,
                window_end: end,
                params_through: snap.through,
                reference_through: snap.through,
            });
        }
        if cfg.schedule == Schedule::EvaluateThenAdapt {
            absorb_until(stream, &mut state, &mut absorbed, end, base, cfg, &mut snapshots)?;
        }

        if end == stream.len() {
            break;
        }
        start += stride;
        window_index += 1;
        // Keep only the newest snapshot usable by the next window and later ones.
        while snapshots.len() > 1 && snapshots[1].through <= start {
            snapshots.pop_front();
        }
    }
    Ok(ReplayOutcome { windows, audit, state })
}

fn absorb_until(
    stream: &[LabeledObservation],
    state: &mut StreamState,
    absorbed: &mut usize,
    end: usize,
    base: usize,
    cfg: &ReplayConfig,
    snapshots: &mut VecDeque<Snapshot>,
) -> Result<(), ReplayError> {
    if end <= *absorbed {
        return Ok(());
    }
    state.absorb(&stream[*absorbed..end]);
    *absorbed = end;
    if cfg.adapt {
        let history: Vec<(f64, u8)> = state.history.iter().copied().collect();
        state.params = fit_platt(&history, Some(&state.params), &cfg.fit)?;
    }
    debug_assert_eq!(state.observed, base + end);
    snapshots.push_back(Snapshot {
        through: end,
        params: state.params,
        reference: state.reference,
    });
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivityGroup {
    Low,
    Average,
    High,
}

impl ActivityGroup {
    pub const ALL: [ActivityGroup; 3] = [ActivityGroup::Low, ActivityGroup::Average, ActivityGroup::High];

    pub fn as_str(&self) -> &'static str {
        match self {
            ActivityGroup::Low => "low",
            ActivityGroup::Average => "average",
            ActivityGroup::High => "high",
        }
    }
}

impl fmt::Display for ActivityGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Tercile grouping by record count. Streams with equal counts all take the
/// lowest group any of them would get.
pub fn segment_streams<K: Ord + Clone>(counts: &BTreeMap<K, usize>) -> BTreeMap<K, ActivityGroup> {
    let mut ranked: Vec<(&K, usize)> = counts.iter().map(|(k, &c)| (k, c)).collect();
    ranked.sort_by(|a, b| a.1.cmp(&b.1).then_with(|| a.0.cmp(b.0)));
    let n = ranked.len();
    let mut out = BTreeMap::new();
    let mut run_group = ActivityGroup::Low;
    for (i, (key, count)) in ranked.iter().enumerate() {
        let group = ActivityGroup::ALL[(3 * i / n).min(2)];
        if i == 0 || ranked[i - 1].1 != *count {
            run_group = group;
        }
        out.insert((*key).clone(), run_group);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Mean and sample standard deviation; the deviation of one value is 0.
    pub fn of(values: &[f64]) -> MeanStd {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        MeanStd { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub group: Option<ActivityGroup>,
    pub n_streams: usize,
    pub single_stream: bool,
    pub ece: MeanStd,
    pub brier: MeanStd,
    pub bss: MeanStd,
    pub mce: MeanStd,
}

fn stream_means(windows: &[WindowMetrics]) -> Option<[f64; 4]> {
    if windows.is_empty() {
        return None;
    }
    let n = windows.len() as f64;
    let mut acc = [0.0; 4];
    for w in windows {
        acc[0] += w.metrics.ece;
        acc[1] += w.metrics.brier;
        acc[2] += w.metrics.bss;
        acc[3] += w.metrics.mce;
    }
    Some(acc.map(|v| v / n))
}

fn summarize(group: Option<ActivityGroup>, means: &[[f64; 4]]) -> SummaryRow {
    let col = |i: usize| MeanStd::of(&means.iter().map(|m| m[i]).collect::<Vec<_>>());
    SummaryRow {
        group,
        n_streams: means.len(),
        single_stream: means.len() == 1,
        ece: col(0),
        brier: col(1),
        bss: col(2),
        mce: col(3),
    }
}

/// Mean and spread across streams, each stream first averaged over its
/// evaluated windows. Streams without evaluated windows are left out.
pub fn aggregate(
    per_stream: &BTreeMap<StreamKey, Vec<WindowMetrics>>,
    grouping: Option<&BTreeMap<StreamKey, ActivityGroup>>,
) -> Result<Vec<SummaryRow>, ReplayError> {
    let means: Vec<(&StreamKey, [f64; 4])> = per_stream
        .iter()
        .filter_map(|(k, w)| stream_means(w).map(|m| (k, m)))
        .collect();
    if means.is_empty() {
        return Err(ReplayError::NothingToAggregate);
    }
    match grouping {
        None => {
            let all: Vec<[f64; 4]> = means.iter().map(|(_, m)| *m).collect();
            Ok(vec![summarize(None, &all)])
        }
        Some(groups) => Ok(ActivityGroup::ALL
            .iter()
            .filter_map(|g| {
                let members: Vec<[f64; 4]> = means
                    .iter()
                    .filter(|(k, _)| groups.get(*k) == Some(g))
                    .map(|(_, m)| *m)
                    .collect();
                (!members.is_empty()).then(|| summarize(Some(*g), &members))
            })
            .collect()),
    }
}
