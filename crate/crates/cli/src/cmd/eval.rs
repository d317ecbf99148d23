use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use calibcc_core::calibration::{read_calibrators, CalibratorScope, PlattParams};
use calibcc_core::labeling::LabeledObservation;
use calibcc_core::metrics::{self, language_prior_mean, BaseRateReference, MetricReport};
use calibcc_core::telemetry::LanguageTag;
use clap::Args;

use crate::output::{csv_bytes, fmt_f64, fmt_opt, label_all, read_telemetry, write_atomic};
use crate::settings::{ScopeArg, Settings};

pub const BASELINE: &str = "Baseline (Avg)";

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Telemetry input
    #[arg(long, default_value = "telemetry.jsonl")]
    pub input: PathBuf,
    /// Calibrators written by `fit`
    #[arg(long, default_value = "calibrators.jsonl")]
    pub calibrators: PathBuf,
    /// Directory for metrics.csv and reliability_*.csv
    #[arg(long, default_value = "eval")]
    pub out_dir: PathBuf,
    /// Seed each language subset's reference with that language's historical rate
    #[arg(long)]
    pub language_priors: bool,
}

pub fn load_calibrators(path: &Path) -> anyhow::Result<BTreeMap<CalibratorScope, PlattParams>> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    read_calibrators(BufReader::new(file))
        .with_context(|| format!("invalid calibrators in {}", path.display()))?
        .into_iter()
        .map(|r| Ok((r.scope()?, r.params())))
        .collect()
}

pub fn require(
    calibrators: &BTreeMap<CalibratorScope, PlattParams>,
    scope: &CalibratorScope,
) -> anyhow::Result<PlattParams> {
    calibrators
        .get(scope)
        .copied()
        .ok_or_else(|| anyhow!("no calibrator for scope `{scope}`"))
}

/// One row of metrics.csv.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub model: String,
    pub subset: String,
    pub n: usize,
    /// `None` for the baseline row, which carries Brier only.
    pub report: Option<MetricReport>,
    pub brier: f64,
    pub binned: Option<metrics::BinnedReliability>,
}

fn scored(
    model: &str,
    subset: &str,
    obs: &[&LabeledObservation],
    predict: impl Fn(&LabeledObservation) -> f64,
    reference: &BaseRateReference,
    bins: usize,
) -> anyhow::Result<EvalRow> {
    let preds: Vec<f64> = obs.iter().map(|o| predict(o)).collect();
    let outcomes: Vec<u8> = obs.iter().map(|o| o.label).collect();
    let report = metrics::report(&preds, &outcomes, reference, bins)?;
    Ok(EvalRow {
        model: model.to_string(),
        subset: subset.to_string(),
        n: obs.len(),
        brier: report.brier,
        report: Some(report),
        binned: Some(metrics::bin(&preds, &outcomes, bins)?),
    })
}

pub fn evaluate(
    obs: &[LabeledObservation],
    calibrators: &BTreeMap<CalibratorScope, PlattParams>,
    settings: &Settings,
    language_priors: bool,
) -> anyhow::Result<Vec<EvalRow>> {
    let general = require(calibrators, &CalibratorScope::General)?;
    let languages: BTreeSet<LanguageTag> = obs.iter().map(|o| o.language.clone()).collect();
    let per_language: BTreeMap<LanguageTag, PlattParams> = if settings.scope == ScopeArg::Language {
        languages
            .iter()
            .map(|l| Ok((l.clone(), require(calibrators, &CalibratorScope::Language(l.clone()))?)))
            .collect::<anyhow::Result<_>>()?
    } else {
        BTreeMap::new()
    };

    let mut subsets: Vec<(String, Vec<&LabeledObservation>, f64)> =
        vec![("all".into(), obs.iter().collect(), settings.prior_mean)];
    for l in &languages {
        let prior = if language_priors {
            language_prior_mean(l)
        } else {
            settings.prior_mean
        };
        subsets.push((l.to_string(), obs.iter().filter(|o| &o.language == l).collect(), prior));
    }

    let identity = PlattParams::identity();
    let mut rows = Vec::new();
    for (subset, members, prior) in &subsets {
        if members.is_empty() {
            continue;
        }
        let reference = BaseRateReference::from_mean(*prior, settings.prior_count)?;
        let bins = settings.bins;
        rows.push(scored(
            "uncalibrated",
            subset,
            members,
            |o| identity.apply(o.confidence),
            &reference,
            bins,
        )?);
        rows.push(scored(
            "general",
            subset,
            members,
            |o| general.apply(o.confidence),
            &reference,
            bins,
        )?);
        if !per_language.is_empty() {
            rows.push(scored(
                "language-specific",
                subset,
                members,
                |o| per_language[&o.language].apply(o.confidence),
                &reference,
                bins,
            )?);
        }
        let r = reference.predict();
        let outcomes: Vec<u8> = members.iter().map(|o| o.label).collect();
        rows.push(EvalRow {
            model: BASELINE.to_string(),
            subset: subset.clone(),
            n: members.len(),
            report: None,
            brier: metrics::brier(&vec![r; members.len()], &outcomes)?,
            binned: None,
        });
    }
    Ok(rows)
}

pub fn metrics_csv(rows: &[EvalRow]) -> anyhow::Result<Vec<u8>> {
    csv_bytes(
        &["model", "subset", "n", "ece", "brier", "bss", "mce", "correlation"],
        |w| {
            for r in rows {
                let m = r.report.as_ref();
                w.write_record([
                    r.model.clone(),
                    r.subset.clone(),
                    r.n.to_string(),
                    fmt_opt(m.map(|m| m.ece)),
                    fmt_f64(r.brier),
                    fmt_opt(m.map(|m| m.bss)),
                    fmt_opt(m.map(|m| m.mce)),
                    fmt_opt(m.and_then(|m| m.correlation)),
                ])?;
            }
            Ok(())
        },
    )
}

pub fn run(args: &EvalArgs, settings: &Settings) -> anyhow::Result<()> {
    let obs = label_all(&read_telemetry(&args.input)?)?;
    let calibrators = load_calibrators(&args.calibrators)?;
    let rows = evaluate(&obs, &calibrators, settings, args.language_priors)?;
    write_atomic(&args.out_dir.join("metrics.csv"), &metrics_csv(&rows)?)?;
    for r in &rows {
        if let Some(b) = &r.binned {
            let mut out = Vec::new();
            b.write_csv(&mut out)?;
            let name = format!("reliability_{}_{}.csv", r.model, r.subset);
            write_atomic(&args.out_dir.join(name), &out)?;
        }
        match &r.report {
            Some(m) => eprintln!(
                "{:<18} {:<8} n={:<7} ece={:.4} brier={:.4} bss={:.4} mce={:.4}",
                r.model, r.subset, r.n, m.ece, m.brier, m.bss, m.mce
            ),
            None => eprintln!("{:<18} {:<8} n={:<7} brier={:.4}", r.model, r.subset, r.n, r.brier),
        }
    }
    Ok(())
}
