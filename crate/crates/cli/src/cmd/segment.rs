use std::collections::BTreeMap;
use std::path::PathBuf;

use calibcc_core::adaptive::segment_streams;
use calibcc_core::telemetry::{group_records, StreamKeying};
use clap::Args;

use crate::output::{csv_bytes, read_telemetry, write_atomic};
use crate::settings::{ScopeArg, Settings};

#[derive(Debug, Args)]
pub struct SegmentArgs {
    /// Telemetry input
    #[arg(long, default_value = "telemetry.jsonl")]
    pub input: PathBuf,
    /// Segment table output
    #[arg(long, default_value = "segments.csv")]
    pub out: PathBuf,
}

/// Streams are per user unless `--scope per-user-project` is given.
pub fn run(args: &SegmentArgs, settings: &Settings) -> anyhow::Result<()> {
    let keying = match settings.scope {
        ScopeArg::PerUserProject => StreamKeying::PerUserProject,
        _ => StreamKeying::PerUser,
    };
    let streams = group_records(read_telemetry(&args.input)?, keying)?;
    anyhow::ensure!(!streams.is_empty(), "no records in {}", args.input.display());
    let counts: BTreeMap<_, _> = streams.iter().map(|s| (s.key.clone(), s.records.len())).collect();
    let groups = segment_streams(&counts);
    let bytes = csv_bytes(&["stream_key", "count", "group"], |w| {
        for (key, count) in &counts {
            w.write_record([key.to_string(), count.to_string(), groups[key].to_string()])?;
        }
        Ok(())
    })?;
    write_atomic(&args.out, &bytes)?;
    eprintln!("segmented {} streams", counts.len());
    Ok(())
}
