//! Confidence calibration for code-completion telemetry.
//!
//! The pipeline runs in five stages:
//!
//! - [`telemetry`] parses line-delimited interaction logs and groups them
//!   into time-ordered streams (per user, or per user and project).
//! - [`labeling`] turns raw evidence into `(confidence, label)` pairs: the
//!   geometric mean of token probabilities and the preserved ratio of the
//!   suggestion, thresholded at 0.5.
//! - [`calibration`] fits Platt-scaling maps by regularized Newton iterations.
//! - [`metrics`] scores predictions with ECE, MCE, Brier and Brier skill
//!   against a Beta-posterior base-rate reference.
//! - [`adaptive`] replays keyed streams with progressive validation:
//!   each window is scored by the model from before the window, then the
//!   model is refit on a bounded history.
//!
//! [`simgen`] produces synthetic telemetry with known true calibration maps
//! and [`corpus`] prepares fill-in-the-middle examples for external model
//! runners. [`plot`] renders standalone SVG charts.

pub mod adaptive;
pub mod calibration;
pub mod corpus;
pub mod jsonl;
pub mod labeling;
pub mod metrics;
pub mod plot;
pub mod simgen;
pub mod telemetry;

pub use adaptive::{replay, ReplayConfig, StreamState, WindowMetrics};
pub use calibration::{calibrate, fit_platt, CalibratorScope, FitOptions, PlattParams};
pub use labeling::{label_record, LabeledObservation};
pub use metrics::{BaseRateReference, BinnedReliability, MetricReport};
pub use telemetry::{InteractionRecord, LanguageTag, StreamKey, StreamKeying};
