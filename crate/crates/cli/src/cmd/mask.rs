use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use calibcc_core::corpus::{export_examples, mask, ContextFile, MaskPolicy, MaskPolicyConfig, MAX_CONTEXT_FILES};
use calibcc_core::telemetry::{normalize_language, LanguageTag};
use clap::Args;

use crate::output::write_atomic;
use crate::settings::Settings;

#[derive(Debug, Args)]
pub struct MaskArgs {
    /// Source files to mask, processed in the given order
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
    /// Examples output
    #[arg(long, default_value = "examples.jsonl")]
    pub out: PathBuf,
    /// Masking policy
    #[arg(long, value_enum, default_value = "random-line-span")]
    pub policy: PolicyArg,
    /// Longest masked span, in lines
    #[arg(long, default_value_t = 5)]
    pub max_span_lines: usize,
    /// Language tag [default: from the file extension]
    #[arg(long)]
    pub language: Option<String>,
    /// Auxiliary context file attached to every example (up to 3, in order)
    #[arg(long = "context")]
    pub context: Vec<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum PolicyArg {
    RandomLineSpan,
}

pub fn language_for(path: &Path) -> LanguageTag {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .unwrap_or_default()
        .to_ascii_lowercase();
    match ext.as_str() {
        "java" => LanguageTag::Java,
        "py" | "ipynb" => LanguageTag::Python,
        "kt" | "kts" => LanguageTag::Kotlin,
        other => normalize_language(other),
    }
}

pub fn run(args: &MaskArgs, settings: &Settings) -> anyhow::Result<()> {
    if args.context.len() > MAX_CONTEXT_FILES {
        bail!("at most {MAX_CONTEXT_FILES} context files are allowed");
    }
    let context = args
        .context
        .iter()
        .map(|p| {
            Ok(ContextFile {
                path: p.display().to_string(),
                content: std::fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?,
            })
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let base = settings.seed_or_default();
    let mut examples = Vec::with_capacity(args.files.len());
    for (i, path) in args.files.iter().enumerate() {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        let cfg = MaskPolicyConfig {
            policy: match args.policy {
                PolicyArg::RandomLineSpan => MaskPolicy::RandomLineSpan,
            },
            max_span_lines: args.max_span_lines,
            seed: base.wrapping_add(i as u64),
        };
        let language = match &args.language {
            Some(l) => normalize_language(l),
            None => language_for(path),
        };
        let ex = mask(&path.display().to_string(), language, &text, &cfg)
            .with_context(|| format!("cannot mask {}", path.display()))?
            .with_context(context.clone())?;
        examples.push(ex);
    }
    let mut out = Vec::new();
    let n = export_examples(&examples, &mut out)?;
    write_atomic(&args.out, &out)?;
    eprintln!("wrote {n} examples to {}", args.out.display());
    Ok(())
}
