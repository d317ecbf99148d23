//! Synthetic telemetry with known ground truth.
//!
//! Each record draws a latent score `z ~ Normal(mean, std)`, logs
//! `conf = sigmoid(z)` as its raw confidence, and is accepted with
//! probability `sigmoid(a_u * z + b_u + offset(language))`, where `(a_u, b_u)`
//! is the user's true map. With the default link, Platt scaling is
//! well-specified and fitted parameters can be checked against the ledger.
//!
//! Randomness comes from ChaCha8 keyed by the spec seed, with one stream
//! per `(user index, purpose)`: stream `8 * user + p` for purpose `p`
//! (0 = true map, 1 = projects and timestamps, 2 = records). Users are
//! therefore generated independently of each other and of scheduling.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibration::sigmoid;
use crate::telemetry::{sort_records, InteractionRecord, LanguageTag, StreamKey};

#[derive(Debug, Error, PartialEq)]
pub enum GeneratorError {
    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountRange {
    pub min: usize,
    pub max: usize,
}

impl CountRange {
    pub const fn new(min: usize, max: usize) -> Self {
        CountRange { min, max }
    }
}

/// Weights over java, python and kotlin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LanguageMix {
    pub java: f64,
    pub python: f64,
    pub kotlin: f64,
}

impl LanguageMix {
    fn weights(&self) -> [(LanguageTag, f64); 3] {
        [
            (LanguageTag::Java, self.java),
            (LanguageTag::Python, self.python),
            (LanguageTag::Kotlin, self.kotlin),
        ]
    }
}

/// Additive intercept shift per language.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LanguageOffsets {
    pub java: f64,
    pub python: f64,
    pub kotlin: f64,
}

impl LanguageOffsets {
    fn get(&self, tag: &LanguageTag) -> f64 {
        match tag {
            LanguageTag::Java => self.java,
            LanguageTag::Python => self.python,
            LanguageTag::Kotlin => self.kotlin,
            LanguageTag::Other(_) => 0.0,
        }
    }
}

/// Latent score distribution, in logit space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceModel {
    pub mean: f64,
    pub std: f64,
}

/// Population distribution of per-user true maps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapPrior {
    pub slope_mean: f64,
    pub slope_std: f64,
    pub intercept_mean: f64,
    pub intercept_std: f64,
}

/// From `at_fraction` of each user's timeline onward, every user follows
/// the map `(slope, intercept)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapShift {
    pub at_fraction: f64,
    pub slope: f64,
    pub intercept: f64,
}

/// How acceptance probability depends on the latent score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrueLink {
    /// `sigmoid(a z + b)`: Platt scaling is well-specified.
    Logistic,
    /// Piecewise-linear acceptance probability over confidence, ignoring
    /// the user map. Platt scaling cannot represent it exactly.
    PiecewiseLinear { knots: Vec<(f64, f64)> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub seed: u64,
    pub n_users: usize,
    pub projects_per_user: CountRange,
    pub records_per_stream: CountRange,
    pub language_mix: LanguageMix,
    #[serde(default)]
    pub language_offsets: LanguageOffsets,
    pub confidence_model: ConfidenceModel,
    pub user_map_prior: MapPrior,
    #[serde(default)]
    pub shift_schedule: Vec<MapShift>,
    #[serde(default = "default_link")]
    pub link: TrueLink,
    #[serde(default)]
    pub start_time_ms: i64,
    /// Mean gap between a user's consecutive records.
    #[serde(default = "default_gap")]
    pub mean_gap_ms: i64,
}

fn default_link() -> TrueLink {
    TrueLink::Logistic
}

fn default_gap() -> i64 {
    60_000
}

impl GeneratorSpec {
    /// A single population map shared by every user, with no heterogeneity.
    pub fn homogeneous(seed: u64, n_users: usize, records: usize, slope: f64, intercept: f64) -> Self {
        GeneratorSpec {
            seed,
            n_users,
            projects_per_user: CountRange::new(1, 1),
            records_per_stream: CountRange::new(records, records),
            language_mix: LanguageMix {
                java: 1.0 / 3.0,
                python: 1.0 / 3.0,
                kotlin: 1.0 / 3.0,
            },
            language_offsets: LanguageOffsets::default(),
            confidence_model: ConfidenceModel { mean: 0.0, std: 1.5 },
            user_map_prior: MapPrior {
                slope_mean: slope,
                slope_std: 0.0,
                intercept_mean: intercept,
                intercept_std: 0.0,
            },
            shift_schedule: Vec::new(),
            link: TrueLink::Logistic,
            start_time_ms: 1_700_000_000_000,
            mean_gap_ms: default_gap(),
        }
    }

    pub fn validate(&self) -> Result<(), GeneratorError> {
        let bad = |msg: &str| Err(GeneratorError::InvalidSpec(msg.to_string()));
        if self.n_users == 0 {
            return bad("n_users must be positive");
        }
        for (name, r) in [
            ("projects_per_user", self.projects_per_user),
            ("records_per_stream", self.records_per_stream),
        ] {
            if r.min == 0 || r.min > r.max {
                return Err(GeneratorError::InvalidSpec(format!(
                    "{name} must satisfy 1 <= min <= max"
                )));
            }
        }
        let w = self.language_mix.weights();
        if w.iter().any(|(_, v)| !v.is_finite() || *v < 0.0) {
            return bad("language weights must be nonnegative");
        }
        let total: f64 = w.iter().map(|(_, v)| v).sum();
        if (total - 1.0).abs() > 1e-9 {
            return bad("language weights must sum to 1");
        }
        let cm = self.confidence_model;
        if !(cm.std > 0.0 && cm.std.is_finite() && cm.mean.is_finite()) {
            return bad("confidence std must be positive");
        }
        let p = self.user_map_prior;
        if [p.slope_mean, p.intercept_mean].iter().any(|v| !v.is_finite())
            || [p.slope_std, p.intercept_std]
                .iter()
                .any(|v| !v.is_finite() || *v < 0.0)
        {
            return bad("user map prior must be finite with nonnegative spreads");
        }
        let o = self.language_offsets;
        if [o.java, o.python, o.kotlin].iter().any(|v| !v.is_finite()) {
            return bad("language offsets must be finite");
        }
        for s in &self.shift_schedule {
            if !(0.0..=1.0).contains(&s.at_fraction) || !s.slope.is_finite() || !s.intercept.is_finite() {
                return bad("shifts need a fraction in [0, 1] and a finite map");
            }
        }
        if let TrueLink::PiecewiseLinear { knots } = &self.link {
            if knots.len() < 2
                || knots.windows(2).any(|w| w[1].0 <= w[0].0)
                || knots.iter().any(|(_, y)| !(0.0..=1.0).contains(y))
            {
                return bad("piecewise link needs >= 2 knots, increasing x, y in [0, 1]");
            }
        }
        if self.mean_gap_ms < 1 {
            return bad("mean_gap_ms must be positive");
        }
        Ok(())
    }
}

/// Scaled-down stand-in for the production logs: Java/Python/Kotlin shares of
/// 48.2/38.2/13.6 %, acceptance near 26 % overall (28.09/24.29/23.44 % per
/// language), and raw confidence overconfident enough for an uncalibrated
/// ECE near 0.30. About 100k records.
///
/// Population parameters were tuned numerically against those targets.
/// User-level spread (slope 0.15, intercept 0.3) is a convention.
pub fn paper_analog_spec() -> GeneratorSpec {
    GeneratorSpec {
        seed: 20_240_601,
        n_users: 400,
        projects_per_user: CountRange::new(1, 3),
        records_per_stream: CountRange::new(50, 200),
        language_mix: LanguageMix {
            java: 0.482,
            python: 0.382,
            kotlin: 0.136,
        },
        language_offsets: LanguageOffsets {
            java: 0.1256,
            python: -0.1073,
            kotlin: -0.1623,
        },
        confidence_model: ConfidenceModel { mean: 0.32, std: 1.2 },
        user_map_prior: MapPrior {
            slope_mean: 0.8,
            slope_std: 0.15,
            intercept_mean: -1.5088,
            intercept_std: 0.3,
        },
        shift_schedule: Vec::new(),
        link: TrueLink::Logistic,
        start_time_ms: 1_700_000_000_000,
        mean_gap_ms: default_gap(),
    }
}

/// Fifty users with strongly differing true maps and 2k to 8k records each,
/// for comparing personalized against static calibration.
pub fn heterogeneous_spec() -> GeneratorSpec {
    GeneratorSpec {
        seed: 7,
        n_users: 50,
        projects_per_user: CountRange::new(1, 1),
        records_per_stream: CountRange::new(2000, 8000),
        language_mix: LanguageMix {
            java: 0.482,
            python: 0.382,
            kotlin: 0.136,
        },
        language_offsets: LanguageOffsets::default(),
        confidence_model: ConfidenceModel { mean: 0.32, std: 1.2 },
        user_map_prior: MapPrior {
            slope_mean: 1.0,
            slope_std: 0.2,
            intercept_mean: -1.3,
            intercept_std: 1.0,
        },
        shift_schedule: Vec::new(),
        link: TrueLink::Logistic,
        start_time_ms: 1_700_000_000_000,
        mean_gap_ms: default_gap(),
    }
}

/// One ledger row per generated user-project stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub stream_key: String,
    /// The user's map at the start of the stream, before any shift.
    pub true_a: f64,
    pub true_b: f64,
    pub realized_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserTruth {
    pub user_id: String,
    pub slope: f64,
    pub intercept: f64,
    pub records: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrueBehavior {
    pub ledger: Vec<LedgerRow>,
    pub users: Vec<UserTruth>,
    /// Record count of each ledger stream, in ledger order.
    pub stream_sizes: Vec<usize>,
}

impl TrueBehavior {
    /// Acceptance rate over all generated records.
    pub fn realized_rate(&self) -> f64 {
        let total: usize = self.stream_sizes.iter().sum();
        self.stream_sizes
            .iter()
            .zip(&self.ledger)
            .map(|(n, r)| r.realized_rate * *n as f64)
            .sum::<f64>()
            / total as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    /// All records, ordered by `(timestamp, record_id)`.
    pub records: Vec<InteractionRecord>,
    pub truth: TrueBehavior,
}

pub fn user_id(index: usize) -> String {
    format!("u{index:04}")
}

fn rng_for(seed: u64, user: usize, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(8 * user as u64 + purpose);
    rng
}

fn normal(rng: &mut ChaCha8Rng, mean: f64, std: f64) -> f64 {
    if std == 0.0 {
        return mean;
    }
    Normal::new(mean, std).expect("validated spread").sample(rng)
}

fn piecewise(knots: &[(f64, f64)], x: f64) -> f64 {
    let first = knots[0];
    let last = knots[knots.len() - 1];
    if x <= first.0 {
        return first.1;
    }
    if x >= last.0 {
        return last.1;
    }
    let i = knots.partition_point(|k| k.0 <= x);
    let (x0, y0) = knots[i - 1];
    let (x1, y1) = knots[i];
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

impl TrueLink {
    /// Acceptance probability for latent score `z` under map `(a, b)`.
    pub fn probability(&self, a: f64, b: f64, z: f64) -> f64 {
        match self {
            TrueLink::Logistic => sigmoid(a * z + b),
            TrueLink::PiecewiseLinear { knots } => piecewise(knots, sigmoid(z)),
        }
    }
}

struct UserOutput {
    records: Vec<InteractionRecord>,
    ledger: Vec<LedgerRow>,
    sizes: Vec<usize>,
    truth: UserTruth,
}

fn generate_user(spec: &GeneratorSpec, index: usize) -> UserOutput {
    let uid = user_id(index);
    let prior = spec.user_map_prior;
    let mut map_rng = rng_for(spec.seed, index, 0);
    let slope = normal(&mut map_rng, prior.slope_mean, prior.slope_std);
    let intercept = normal(&mut map_rng, prior.intercept_mean, prior.intercept_std);

    let mut layout_rng = rng_for(spec.seed, index, 1);
    let n_projects = layout_rng.random_range(spec.projects_per_user.min..=spec.projects_per_user.max);
    let sizes: Vec<usize> = (0..n_projects)
        .map(|_| layout_rng.random_range(spec.records_per_stream.min..=spec.records_per_stream.max))
        .collect();
    let mut slots: Vec<usize> = sizes
        .iter()
        .enumerate()
        .flat_map(|(p, &n)| std::iter::repeat_n(p, n))
        .collect();
    slots.shuffle(&mut layout_rng);
    let total = slots.len();
    let mut t = spec.start_time_ms + layout_rng.random_range(0..spec.mean_gap_ms);
    let timestamps: Vec<i64> = (0..total)
        .map(|_| {
            t += layout_rng.random_range(1..=2 * spec.mean_gap_ms);
            t
        })
        .collect();

    let mut rng = rng_for(spec.seed, index, 2);
    let latent =
        Normal::new(spec.confidence_model.mean, spec.confidence_model.std).expect("validated confidence model");
    let weights = spec.language_mix.weights();
    let mut accepted = vec![0usize; n_projects];
    let mut records = Vec::with_capacity(total);
    for (i, (&project, &ts)) in slots.iter().zip(&timestamps).enumerate() {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut language = LanguageTag::Kotlin;
        for (tag, w) in &weights {
            acc += w;
            if u < acc {
                language = tag.clone();
                break;
            }
        }
        let z = latent.sample(&mut rng);
        let conf = sigmoid(z).max(f64::MIN_POSITIVE);
        let fraction = i as f64 / total as f64;
        let (a, b) = spec
            .shift_schedule
            .iter()
            .filter(|s| fraction >= s.at_fraction)
            .max_by(|x, y| x.at_fraction.total_cmp(&y.at_fraction))
            .map_or((slope, intercept), |s| (s.slope, s.intercept));
        let p = spec.link.probability(a, b + spec.language_offsets.get(&language), z);
        let outcome = u8::from(rng.random::<f64>() < p);
        accepted[project] += usize::from(outcome);
        records.push(InteractionRecord {
            record_id: format!("{uid}-{i:06}"),
            timestamp: ts,
            user_id: uid.clone(),
            project_id: Some(format!("p{project}")),
            language,
            token_logprobs: None,
            raw_confidence: Some(conf),
            suggestion_text: "<synthetic>".to_string(),
            final_text: None,
            preserved_ratio: None,
            outcome: Some(outcome),
        });
    }
    let ledger = sizes
        .iter()
        .enumerate()
        .map(|(p, &n)| LedgerRow {
            stream_key: StreamKey::UserProject(uid.clone(), format!("p{p}")).to_string(),
            true_a: slope,
            true_b: intercept,
            realized_rate: accepted[p] as f64 / n as f64,
        })
        .collect();
    UserOutput {
        records,
        ledger,
        sizes,
        truth: UserTruth {
            user_id: uid,
            slope,
            intercept,
            records: total,
        },
    }
}

pub fn generate(spec: &GeneratorSpec) -> Result<Generated, GeneratorError> {
    spec.validate()?;
    let mut records = Vec::new();
    let mut ledger = Vec::new();
    let mut stream_sizes = Vec::new();
    let mut users = Vec::with_capacity(spec.n_users);
    for index in 0..spec.n_users {
        let out = generate_user(spec, index);
        records.extend(out.records);
        ledger.extend(out.ledger);
        stream_sizes.extend(out.sizes);
        users.push(out.truth);
    }
    sort_records(&mut records);
    Ok(Generated {
        records,
        truth: TrueBehavior {
            ledger,
            users,
            stream_sizes,
        },
    })
}
