//! Atomic file output and shared input loading.

use std::fs;
use std::io::{BufReader, Write};
use std::path::Path;

use anyhow::Context;
use calibcc_core::labeling::{label_record, LabeledObservation};
use calibcc_core::telemetry::{group_records, read_records, LoadOptions, StreamKey, StreamKeying};

/// Writes `bytes` to a temporary file next to `path`, then renames it into
/// place, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("cannot create a temporary file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path)
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

/// Builds a CSV document in memory.
pub fn csv_bytes<F>(header: &[&str], fill: F) -> anyhow::Result<Vec<u8>>
where
    F: FnOnce(&mut csv::Writer<Vec<u8>>) -> anyhow::Result<()>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    fill(&mut w)?;
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn read_telemetry(path: &Path) -> anyhow::Result<Vec<calibcc_core::InteractionRecord>> {
    let file = fs::File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    let (records, _) = read_records(BufReader::new(file), LoadOptions::default())
        .with_context(|| format!("invalid telemetry in {}", path.display()))?;
    Ok(records)
}

pub fn label_all(records: &[calibcc_core::InteractionRecord]) -> anyhow::Result<Vec<LabeledObservation>> {
    records
        .iter()
        .map(|r| label_record(r).with_context(|| format!("cannot label record `{}`", r.record_id)))
        .collect()
}

/// Labeled observations of every stream under `keying`, in key order.
pub fn labeled_streams(
    records: Vec<calibcc_core::InteractionRecord>,
    keying: StreamKeying,
) -> anyhow::Result<Vec<(StreamKey, Vec<LabeledObservation>)>> {
    group_records(records, keying)?
        .into_iter()
        .map(|s| Ok((s.key, label_all(&s.records)?)))
        .collect()
}

pub fn thread_pool(jobs: usize) -> anyhow::Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?)
}
