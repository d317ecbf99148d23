use std::collections::BTreeSet;
use std::path::PathBuf;

use calibcc_core::calibration::{fit_scoped, write_calibrators, CalibratorRecord, CalibratorScope, FitOptions};
use calibcc_core::labeling::LabeledObservation;
use calibcc_core::telemetry::{StreamKey, StreamKeying};
use clap::Args;
use rayon::prelude::*;

use crate::output::{label_all, read_telemetry, thread_pool, write_atomic};
use crate::settings::{ScopeArg, Settings};

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Telemetry input
    #[arg(long, default_value = "telemetry.jsonl")]
    pub input: PathBuf,
    /// Calibrator output
    #[arg(long, default_value = "calibrators.jsonl")]
    pub out: PathBuf,
}

/// The general scope first, then one scope per language or stream present.
pub fn scopes_for(scope: ScopeArg, obs: &[LabeledObservation]) -> Vec<CalibratorScope> {
    let mut scopes = vec![CalibratorScope::General];
    let keyed = |keying| -> Vec<CalibratorScope> {
        obs.iter()
            .map(|o| StreamKey::for_record(keying, &o.user, o.project.as_deref()))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .map(CalibratorScope::Stream)
            .collect()
    };
    match scope {
        ScopeArg::General => {}
        ScopeArg::Language => scopes.extend(
            obs.iter()
                .map(|o| o.language.clone())
                .collect::<BTreeSet<_>>()
                .into_iter()
                .map(CalibratorScope::Language),
        ),
        ScopeArg::PerUser => scopes.extend(keyed(StreamKeying::PerUser)),
        ScopeArg::PerUserProject => scopes.extend(keyed(StreamKeying::PerUserProject)),
    }
    scopes
}

pub fn fit_all(obs: &[LabeledObservation], scope: ScopeArg, jobs: usize) -> anyhow::Result<Vec<CalibratorRecord>> {
    let scopes = scopes_for(scope, obs);
    let opts = FitOptions::default();
    thread_pool(jobs)?.install(|| {
        scopes
            .par_iter()
            .map(|s| Ok(CalibratorRecord::new(s, &fit_scoped(obs, s, &opts)?)))
            .collect()
    })
}

pub fn run(args: &FitArgs, settings: &Settings) -> anyhow::Result<()> {
    let obs = label_all(&read_telemetry(&args.input)?)?;
    let rows = fit_all(&obs, settings.scope, settings.jobs)?;
    let mut out = Vec::new();
    write_calibrators(&mut out, &rows)?;
    write_atomic(&args.out, &out)?;
    for r in &rows {
        eprintln!(
            "{:<24} a={:.4} b={:.4} n={} converged={}",
            r.scope, r.slope_a, r.intercept_b, r.n_fit, r.converged
        );
    }
    Ok(())
}
