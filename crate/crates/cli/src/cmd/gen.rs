use std::path::{Path, PathBuf};

use anyhow::Context;
use calibcc_core::simgen::{generate, heterogeneous_spec, paper_analog_spec, GeneratorSpec};
use clap::{Args, ValueEnum};

use crate::output::write_atomic;
use crate::settings::Settings;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// Desk-scale analog of production logs (about 100k records)
    Analog,
    /// 50 users with widely differing true maps, 2k to 8k records each
    Heterogeneous,
    /// Perfectly calibrated raw confidence, 20 users x 5000 records
    Identity,
}

impl Preset {
    pub fn spec(self) -> GeneratorSpec {
        match self {
            Preset::Analog => paper_analog_spec(),
            Preset::Heterogeneous => heterogeneous_spec(),
            Preset::Identity => GeneratorSpec::homogeneous(1, 20, 5000, 1.0, 0.0),
        }
    }
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Built-in generator spec
    #[arg(long, value_enum, default_value = "analog", conflicts_with = "spec_file")]
    pub preset: Preset,
    /// Generator spec as TOML, instead of a preset
    #[arg(long)]
    pub spec_file: Option<PathBuf>,
    /// Override the number of users
    #[arg(long)]
    pub users: Option<usize>,
    /// Telemetry output
    #[arg(long, default_value = "telemetry.jsonl")]
    pub out: PathBuf,
    /// Ground-truth ledger output [default: <out>.ledger.jsonl]
    #[arg(long)]
    pub ledger: Option<PathBuf>,
}

fn ledger_path(out: &Path) -> PathBuf {
    let mut name = out.file_stem().unwrap_or_default().to_os_string();
    name.push(".ledger.jsonl");
    out.with_file_name(name)
}

pub fn run(args: &GenArgs, settings: &Settings) -> anyhow::Result<()> {
    let mut spec = match &args.spec_file {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
            toml::from_str(&text).with_context(|| format!("invalid spec {}", path.display()))?
        }
        None => args.preset.spec(),
    };
    if let Some(seed) = settings.seed {
        spec.seed = seed;
    }
    if let Some(users) = args.users {
        spec.n_users = users;
    }
    let generated = generate(&spec)?;

    let mut telemetry = Vec::new();
    for r in &generated.records {
        telemetry.extend_from_slice(r.to_line().as_bytes());
        telemetry.push(b'\n');
    }
    write_atomic(&args.out, &telemetry)?;

    let mut ledger = Vec::new();
    calibcc_core::jsonl::write_lines(&mut ledger, &generated.truth.ledger)?;
    let ledger_out = args.ledger.clone().unwrap_or_else(|| ledger_path(&args.out));
    write_atomic(&ledger_out, &ledger)?;

    eprintln!(
        "generated {} records in {} streams (seed {}, acceptance rate {:.4})",
        generated.records.len(),
        generated.truth.ledger.len(),
        spec.seed,
        generated.truth.realized_rate()
    );
    Ok(())
}
