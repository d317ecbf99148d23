use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use calibcc_core::metrics::{BinStats, BinnedReliability};
use calibcc_core::plot::{reliability_svg, series_svg, Series};
use clap::Args;
use serde::Deserialize;

use crate::output::{csv_bytes, fmt_f64, write_atomic};
use crate::settings::Settings;

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory holding eval or replay outputs; charts are written next to them
    #[arg(long, default_value = ".")]
    pub dir: PathBuf,
}

#[derive(Debug, Deserialize)]
struct ReliabilityRow {
    bin_low: f64,
    bin_high: f64,
    count: usize,
    mean_confidence: f64,
    mean_outcome: f64,
}

#[derive(Debug, Deserialize)]
struct WindowRow {
    #[allow(dead_code)]
    stream_key: String,
    window_index: usize,
    ece: f64,
    brier: f64,
    bss: f64,
    mce: f64,
}

/// Rebuilds bin totals from a reliability CSV. The bin count comes from the
/// rows' width, falling back to `default_bins` for an empty table.
pub fn read_reliability(path: &Path, default_bins: usize) -> anyhow::Result<BinnedReliability> {
    let rows: Vec<ReliabilityRow> = csv::Reader::from_path(path)?
        .deserialize()
        .collect::<Result<_, _>>()
        .with_context(|| format!("invalid reliability table {}", path.display()))?;
    let bins = rows
        .first()
        .map_or(default_bins, |r| (1.0 / (r.bin_high - r.bin_low)).round() as usize);
    let mut binned = BinnedReliability::empty(bins)?;
    for r in rows {
        let m = ((r.bin_low * bins as f64).round() as usize).min(bins - 1);
        binned.bins[m] = BinStats {
            count: r.count,
            sum_confidence: r.mean_confidence * r.count as f64,
            sum_outcome: r.mean_outcome * r.count as f64,
        };
        binned.total += r.count;
    }
    Ok(binned)
}

/// Per window index: number of streams and mean ece, brier, bss, mce.
pub fn window_series(path: &Path) -> anyhow::Result<BTreeMap<usize, (usize, [f64; 4])>> {
    let mut acc: BTreeMap<usize, (usize, [f64; 4])> = BTreeMap::new();
    for row in csv::Reader::from_path(path)?.deserialize() {
        let r: WindowRow = row.with_context(|| format!("invalid window table {}", path.display()))?;
        let e = acc.entry(r.window_index).or_insert((0, [0.0; 4]));
        e.0 += 1;
        for (slot, v) in e.1.iter_mut().zip([r.ece, r.brier, r.bss, r.mce]) {
            *slot += v;
        }
    }
    for (n, sums) in acc.values_mut() {
        for s in sums.iter_mut() {
            *s /= *n as f64;
        }
    }
    Ok(acc)
}

fn csv_files(dir: &Path, prefix: &str) -> anyhow::Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("cannot list {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().is_some_and(|e| e == "csv")
                && p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with(prefix))
        })
        .collect();
    out.sort();
    Ok(out)
}

fn stem(path: &Path, prefix: &str) -> String {
    let s = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
    s.strip_prefix(prefix).unwrap_or(s).to_string()
}

pub fn run(args: &ReportArgs, settings: &Settings) -> anyhow::Result<()> {
    let reliability = csv_files(&args.dir, "reliability_")?;
    let windows = csv_files(&args.dir, "windows_")?;
    if reliability.is_empty() && windows.is_empty() {
        bail!("no reliability_*.csv or windows_*.csv in {}", args.dir.display());
    }
    for path in &reliability {
        let binned = read_reliability(path, settings.bins)?;
        let title = stem(path, "reliability_").replace('_', " / ");
        write_atomic(&path.with_extension("svg"), reliability_svg(&binned, &title).as_bytes())?;
    }
    for path in &windows {
        let model = stem(path, "windows_");
        let series = window_series(path)?;
        let bytes = csv_bytes(
            &[
                "window_index",
                "n_streams",
                "ece_mean",
                "brier_mean",
                "bss_mean",
                "mce_mean",
            ],
            |w| {
                for (i, (n, m)) in &series {
                    w.write_record([
                        i.to_string(),
                        n.to_string(),
                        fmt_f64(m[0]),
                        fmt_f64(m[1]),
                        fmt_f64(m[2]),
                        fmt_f64(m[3]),
                    ])?;
                }
                Ok(())
            },
        )?;
        write_atomic(&args.dir.join(format!("series_{model}.csv")), &bytes)?;
        let lines: Vec<Series> = ["ECE", "Brier", "BSS"]
            .iter()
            .enumerate()
            .map(|(k, name)| Series {
                name: name.to_string(),
                points: series.iter().map(|(i, (_, m))| (*i as f64, m[k])).collect(),
            })
            .collect();
        let svg = series_svg(&lines, &format!("{model}: mean over streams"), "window", "metric");
        write_atomic(&args.dir.join(format!("series_{model}.svg")), svg.as_bytes())?;
    }
    eprintln!(
        "rendered {} reliability diagrams and {} metric series",
        reliability.len(),
        windows.len()
    );
    Ok(())
}
