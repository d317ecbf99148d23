//! Run settings shared by every subcommand.
//!
//! Precedence, lowest first: built-in defaults, the `--config` TOML file,
//! command-line flags, and finally `CALIBCC_JOBS` for the worker count.

use std::path::Path;

use anyhow::{bail, Context};
use calibcc_core::adaptive::{DEFAULT_MIN_EVAL, DEFAULT_WINDOW};
use calibcc_core::metrics::{DEFAULT_BINS, DEFAULT_PRIOR_COUNT, DEFAULT_PRIOR_MEAN, MAX_BINS};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

pub const DEFAULT_SEED: u64 = 20_240_601;
pub const JOBS_ENV: &str = "CALIBCC_JOBS";
/// TOML integers are signed, so larger seeds could not be saved to a config.
pub const MAX_SEED: u64 = i64::MAX as u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ScopeArg {
    #[default]
    General,
    Language,
    PerUser,
    PerUserProject,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    /// `None` lets `gen` presets keep their own seed; other commands use
    /// [`DEFAULT_SEED`].
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub jobs: usize,
    pub bins: usize,
    pub window: usize,
    /// `None` means equal to `window`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stride: Option<usize>,
    pub min_eval: usize,
    pub prior_mean: f64,
    pub prior_count: f64,
    pub scope: ScopeArg,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            seed: None,
            jobs: 1,
            bins: DEFAULT_BINS,
            window: DEFAULT_WINDOW,
            stride: None,
            min_eval: DEFAULT_MIN_EVAL,
            prior_mean: DEFAULT_PRIOR_MEAN,
            prior_count: DEFAULT_PRIOR_COUNT,
            scope: ScopeArg::General,
        }
    }
}

/// Partial settings, as given on the command line or in a config file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    #[arg(
        long,
        global = true,
        value_parser = clap::value_parser!(u64).range(..=MAX_SEED),
        help = "Random seed, at most 2^63 - 1 [default: 20240601; gen presets keep their own]"
    )]
    pub seed: Option<u64>,
    #[arg(long, global = true, help = "Worker threads [default: 1]; CALIBCC_JOBS overrides")]
    pub jobs: Option<usize>,
    #[arg(
        long,
        global = true,
        value_name = "M",
        help = "Equal-width reliability bins, 1 to 100 [default: 10]"
    )]
    pub bins: Option<usize>,
    #[arg(long, global = true, value_name = "K", help = "Replay window size [default: 100]")]
    pub window: Option<usize>,
    #[arg(long, global = true, help = "Replay window stride [default: window size]")]
    pub stride: Option<usize>,
    #[arg(long, global = true, help = "Smallest trailing window that is scored [default: 20]")]
    pub min_eval: Option<usize>,
    #[arg(long, global = true, help = "Base-rate reference prior mean [default: 0.26]")]
    pub prior_mean: Option<f64>,
    #[arg(long, global = true, help = "Base-rate reference pseudo-count [default: 50]")]
    pub prior_count: Option<f64>,
    #[arg(
        long,
        global = true,
        value_enum,
        help = "Calibrator or stream scope [default: general]"
    )]
    pub scope: Option<ScopeArg>,
}

impl Settings {
    pub fn apply(&mut self, o: &Overrides) {
        if o.seed.is_some() {
            self.seed = o.seed;
        }
        if let Some(v) = o.jobs {
            self.jobs = v;
        }
        if let Some(v) = o.bins {
            self.bins = v;
        }
        if let Some(v) = o.window {
            self.window = v;
        }
        if o.stride.is_some() {
            self.stride = o.stride;
        }
        if let Some(v) = o.min_eval {
            self.min_eval = v;
        }
        if let Some(v) = o.prior_mean {
            self.prior_mean = v;
        }
        if let Some(v) = o.prior_count {
            self.prior_count = v;
        }
        if let Some(v) = o.scope {
            self.scope = v;
        }
    }

    /// Defaults, then `config`, then `flags`, then the jobs variable.
    pub fn resolve(config: Option<&Path>, flags: &Overrides, jobs_env: Option<&str>) -> anyhow::Result<Settings> {
        let mut s = Settings::default();
        if let Some(path) = config {
            s.apply(&read_config(path)?);
        }
        s.apply(flags);
        if let Some(raw) = jobs_env {
            s.jobs = raw
                .trim()
                .parse()
                .with_context(|| format!("{JOBS_ENV} must be a positive integer, got `{raw}`"))?;
        }
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.seed.is_some_and(|s| s > MAX_SEED) {
            bail!("seed must be at most {MAX_SEED}");
        }
        if self.jobs == 0 {
            bail!("jobs must be at least 1");
        }
        if !(1..=MAX_BINS).contains(&self.bins) {
            bail!("bins must be between 1 and {MAX_BINS}");
        }
        if self.window == 0 || self.stride == Some(0) {
            bail!("window and stride must be at least 1");
        }
        if !(self.prior_mean > 0.0 && self.prior_mean < 1.0) {
            bail!("prior mean must lie strictly between 0 and 1");
        }
        if !(self.prior_count > 0.0 && self.prior_count.is_finite()) {
            bail!("prior count must be positive");
        }
        Ok(())
    }

    pub fn seed_or_default(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("settings serialize to TOML")
    }
}

pub fn read_config(path: &Path) -> anyhow::Result<Overrides> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
}
