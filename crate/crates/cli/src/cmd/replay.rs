use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, ensure};
use calibcc_core::adaptive::{
    aggregate, init_stream, no_lookahead_check, replay, segment_streams, ActivityGroup, ReplayConfig, SummaryRow,
    WindowMetrics, DEFAULT_HISTORY,
};
use calibcc_core::calibration::{fit_platt, CalibratorScope, FitOptions, PlattParams};
use calibcc_core::labeling::LabeledObservation;
use calibcc_core::telemetry::{StreamKey, StreamKeying};
use clap::{Args, ValueEnum};
use rayon::prelude::*;

use crate::cmd::eval::{load_calibrators, require};
use crate::output::{csv_bytes, fmt_f64, labeled_streams, read_telemetry, thread_pool, write_atomic};
use crate::settings::{ScopeArg, Settings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitArg {
    /// Start every stream from the general calibrator
    General,
    /// Start every stream from raw confidence, a = 1, b = 0
    Identity,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// Telemetry input
    #[arg(long, default_value = "telemetry.jsonl")]
    pub input: PathBuf,
    /// Calibrators written by `fit` [default: fit a general calibrator on the input]
    #[arg(long)]
    pub calibrators: Option<PathBuf>,
    /// Directory for windows_*.csv and summary.csv
    #[arg(long, default_value = "replay")]
    pub out_dir: PathBuf,
    /// Initial parameters of each adaptive stream
    #[arg(long, value_enum, default_value = "general")]
    pub init: InitArg,
    /// Keep every stream's parameters frozen at their initial values
    #[arg(long)]
    pub no_adapt: bool,
    /// Also summarize by activity tercile
    #[arg(long)]
    pub segment: bool,
    /// Observations kept for refitting each stream
    #[arg(long, default_value_t = DEFAULT_HISTORY)]
    pub history: usize,
}

/// One replayed model: a stream keying plus whether parameters adapt.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Model {
    pub name: &'static str,
    pub keying: StreamKeying,
    pub adapt: bool,
}

pub fn models(scope: ScopeArg, adapt: bool) -> Vec<Model> {
    let general = Model {
        name: "general-static",
        keying: StreamKeying::PerUser,
        adapt: false,
    };
    let person = Model {
        name: "per-person",
        keying: StreamKeying::PerUser,
        adapt,
    };
    let project = Model {
        name: "per-person-project",
        keying: StreamKeying::PerUserProject,
        adapt,
    };
    match scope {
        ScopeArg::PerUser => vec![general, person],
        ScopeArg::PerUserProject => vec![general, project],
        ScopeArg::General | ScopeArg::Language => vec![general, person, project],
    }
}

pub struct ModelRun {
    pub model: Model,
    pub per_stream: BTreeMap<StreamKey, Vec<WindowMetrics>>,
    pub counts: BTreeMap<StreamKey, usize>,
}

pub struct ReplayParams {
    pub general: PlattParams,
    pub init: PlattParams,
    pub history: usize,
}

pub fn run_model(
    model: Model,
    streams: &[(StreamKey, Vec<LabeledObservation>)],
    params: &ReplayParams,
    settings: &Settings,
) -> anyhow::Result<ModelRun> {
    let cfg = ReplayConfig {
        window: settings.window,
        stride: settings.stride,
        min_eval: settings.min_eval,
        bins: settings.bins,
        adapt: model.adapt,
        fit: FitOptions::default(),
        ..ReplayConfig::default()
    };
    let start = if model.adapt { params.init } else { params.general };
    let results: Vec<(StreamKey, Vec<WindowMetrics>)> = streams
        .par_iter()
        .map(|(key, obs)| {
            let state = init_stream(
                key.clone(),
                start,
                settings.prior_mean,
                settings.prior_count,
                params.history,
            )?;
            let out = replay(obs, state, &cfg)?;
            ensure!(no_lookahead_check(&out.audit), "lookahead detected in stream {key}");
            Ok((key.clone(), out.windows))
        })
        .collect::<anyhow::Result<_>>()?;
    Ok(ModelRun {
        model,
        counts: streams.iter().map(|(k, o)| (k.clone(), o.len())).collect(),
        per_stream: results.into_iter().collect(),
    })
}

pub fn windows_csv(per_stream: &BTreeMap<StreamKey, Vec<WindowMetrics>>) -> anyhow::Result<Vec<u8>> {
    csv_bytes(
        &["stream_key", "window_index", "t_end", "n", "ece", "brier", "bss", "mce"],
        |w| {
            for (key, windows) in per_stream {
                for m in windows {
                    w.write_record([
                        key.to_string(),
                        m.window_index.to_string(),
                        m.t_end.to_string(),
                        m.n_window.to_string(),
                        fmt_f64(m.metrics.ece),
                        fmt_f64(m.metrics.brier),
                        fmt_f64(m.metrics.bss),
                        fmt_f64(m.metrics.mce),
                    ])?;
                }
            }
            Ok(())
        },
    )
}

pub fn summary_rows(run: &ModelRun, segmented: bool) -> anyhow::Result<Vec<SummaryRow>> {
    let mut rows = aggregate(&run.per_stream, None)?;
    if segmented {
        let groups: BTreeMap<StreamKey, ActivityGroup> = segment_streams(&run.counts);
        rows.extend(aggregate(&run.per_stream, Some(&groups))?);
    }
    Ok(rows)
}

pub fn summary_csv(rows: &[(&str, SummaryRow)]) -> anyhow::Result<Vec<u8>> {
    csv_bytes(
        &[
            "model",
            "group",
            "n_streams",
            "single_stream",
            "ece_mean",
            "ece_std",
            "brier_mean",
            "brier_std",
            "bss_mean",
            "bss_std",
            "mce_mean",
            "mce_std",
        ],
        |w| {
            for (model, r) in rows {
                w.write_record([
                    model.to_string(),
                    r.group.map_or("all".to_string(), |g| g.to_string()),
                    r.n_streams.to_string(),
                    r.single_stream.to_string(),
                    fmt_f64(r.ece.mean),
                    fmt_f64(r.ece.std),
                    fmt_f64(r.brier.mean),
                    fmt_f64(r.brier.std),
                    fmt_f64(r.bss.mean),
                    fmt_f64(r.bss.std),
                    fmt_f64(r.mce.mean),
                    fmt_f64(r.mce.std),
                ])?;
            }
            Ok(())
        },
    )
}

pub fn run(args: &ReplayArgs, settings: &Settings) -> anyhow::Result<()> {
    let records = read_telemetry(&args.input)?;
    let general = match &args.calibrators {
        Some(path) => require(&load_calibrators(path)?, &CalibratorScope::General)?,
        None => {
            let all = crate::output::label_all(&records)?;
            let data: Vec<(f64, u8)> = all.iter().map(|o| (o.confidence, o.label)).collect();
            fit_platt(&data, None, &FitOptions::default())?
        }
    };
    let params = ReplayParams {
        general,
        init: match args.init {
            InitArg::General => general,
            InitArg::Identity => PlattParams::identity(),
        },
        history: args.history,
    };
    let pool = thread_pool(settings.jobs)?;
    let mut by_keying: BTreeMap<&'static str, Vec<(StreamKey, Vec<LabeledObservation>)>> = BTreeMap::new();
    let mut summary: Vec<(&str, SummaryRow)> = Vec::new();
    for model in models(settings.scope, !args.no_adapt) {
        let tag = match model.keying {
            StreamKeying::PerUserProject => "per-user-project",
            _ => "per-user",
        };
        if !by_keying.contains_key(tag) {
            by_keying.insert(tag, labeled_streams(records.clone(), model.keying)?);
        }
        let run = pool.install(|| run_model(model, &by_keying[tag], &params, settings))?;
        if run.per_stream.values().all(Vec::is_empty) {
            bail!("no stream has a scored window; lower --min-eval or --window");
        }
        let path = args.out_dir.join(format!("windows_{}.csv", model.name));
        write_atomic(&path, &windows_csv(&run.per_stream)?)?;
        for row in summary_rows(&run, args.segment)? {
            eprintln!(
                "{:<20} {:<8} streams={:<5} ece={:.4}±{:.4} brier={:.4}±{:.4} bss={:.4}±{:.4}",
                model.name,
                row.group.map_or("all".to_string(), |g| g.to_string()),
                row.n_streams,
                row.ece.mean,
                row.ece.std,
                row.brier.mean,
                row.brier.std,
                row.bss.mean,
                row.bss.std
            );
            summary.push((model.name, row));
        }
    }
    write_atomic(&args.out_dir.join("summary.csv"), &summary_csv(&summary)?)?;
    Ok(())
}
