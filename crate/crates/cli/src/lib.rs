//! The `calibcc` command line: synthetic data generation, FIM corpus masking,
//! calibrator fitting, static evaluation, adaptive replay, activity
//! segmentation and SVG reporting.
//!
//! Every command is deterministic given its inputs and seed, and every output
//! file is written atomically.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub mod cmd;
pub mod output;
pub mod settings;

use settings::{Overrides, Settings, JOBS_ENV};

#[derive(Debug, Parser)]
#[command(
    name = "calibcc",
    version,
    about = "Calibration analysis for code-completion telemetry"
)]
pub struct Cli {
    /// TOML file with any of the global options; flags take precedence
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(flatten)]
    pub overrides: Overrides,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic telemetry and its ground-truth ledger
    Gen(cmd::gen::GenArgs),
    /// Cut source files into fill-in-the-middle examples
    Mask(cmd::mask::MaskArgs),
    /// Fit the general calibrator plus any scoped ones
    Fit(cmd::fit::FitArgs),
    /// Score uncalibrated, general and language-specific predictions
    Eval(cmd::eval::EvalArgs),
    /// Progressive validation of per-stream adaptive calibrators
    Replay(cmd::replay::ReplayArgs),
    /// Assign streams to low/average/high activity terciles
    Segment(cmd::segment::SegmentArgs),
    /// Render SVG charts for the CSV outputs in a directory
    Report(cmd::report::ReportArgs),
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    let env = std::env::var(JOBS_ENV).ok();
    let settings = Settings::resolve(cli.config.as_deref(), &cli.overrides, env.as_deref())?;
    match &cli.command {
        Command::Gen(a) => cmd::gen::run(a, &settings),
        Command::Mask(a) => cmd::mask::run(a, &settings),
        Command::Fit(a) => cmd::fit::run(a, &settings),
        Command::Eval(a) => cmd::eval::run(a, &settings),
        Command::Replay(a) => cmd::replay::run(a, &settings),
        Command::Segment(a) => cmd::segment::run(a, &settings),
        Command::Report(a) => cmd::report::run(a, &settings),
    }
}
