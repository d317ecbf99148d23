//! Fill-in-the-middle examples for external model runners.
//!
//! A masking policy picks the span the model must regenerate; everything
//! before it is the prefix and everything after is the suffix. Line
//! terminators stay with their line, so `prefix + middle + suffix` is always
//! the original file byte for byte.

use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jsonl::{self, JsonlError};
use crate::telemetry::LanguageTag;

/// Auxiliary files that may accompany one example.
pub const MAX_CONTEXT_FILES: usize = 3;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("file has no non-blank lines")]
    EmptyFile,
    #[error("max_span_lines must be at least 1")]
    InvalidSpan,
    #[error("at most {MAX_CONTEXT_FILES} context files are allowed, got {0}")]
    TooManyContextFiles(usize),
    #[error("context_paths and context_contents differ in length")]
    ContextMismatch,
    #[error("example middle is empty")]
    EmptyMiddle,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextFile {
    pub path: String,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FimExample {
    pub prefix: String,
    pub middle: String,
    pub suffix: String,
    pub multifile_context: Vec<ContextFile>,
    pub language: LanguageTag,
    pub source_path: String,
}

impl FimExample {
    pub fn with_context(mut self, context: Vec<ContextFile>) -> Result<Self, CorpusError> {
        if context.len() > MAX_CONTEXT_FILES {
            return Err(CorpusError::TooManyContextFiles(context.len()));
        }
        self.multifile_context = context;
        Ok(self)
    }

    pub fn reconstruct(&self) -> String {
        let mut s = String::with_capacity(self.prefix.len() + self.middle.len() + self.suffix.len());
        s.push_str(&self.prefix);
        s.push_str(&self.middle);
        s.push_str(&self.suffix);
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaskPolicy {
    #[default]
    RandomLineSpan,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskPolicyConfig {
    pub policy: MaskPolicy,
    pub max_span_lines: usize,
    pub seed: u64,
}

impl Default for MaskPolicyConfig {
    fn default() -> Self {
        MaskPolicyConfig {
            policy: MaskPolicy::RandomLineSpan,
            max_span_lines: 5,
            seed: 0,
        }
    }
}

/// Masks a uniformly chosen start line and a span of `1..=max_span_lines`
/// lines (capped at the lines remaining).
pub fn mask_random_line_span(
    source_path: &str,
    language: LanguageTag,
    file_text: &str,
    cfg: &MaskPolicyConfig,
) -> Result<FimExample, CorpusError> {
    if cfg.max_span_lines == 0 {
        return Err(CorpusError::InvalidSpan);
    }
    if file_text.trim().is_empty() {
        return Err(CorpusError::EmptyFile);
    }
    let lines: Vec<&str> = file_text.split_inclusive('\n').collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let start = rng.random_range(0..lines.len());
    let span = rng.random_range(1..=cfg.max_span_lines.min(lines.len() - start));
    let offset = |line: usize| lines[..line].iter().map(|l| l.len()).sum::<usize>();
    let (a, b) = (offset(start), offset(start + span));
    Ok(FimExample {
        prefix: file_text[..a].to_string(),
        middle: file_text[a..b].to_string(),
        suffix: file_text[b..].to_string(),
        multifile_context: Vec::new(),
        language,
        source_path: source_path.to_string(),
    })
}

pub fn mask(
    source_path: &str,
    language: LanguageTag,
    file_text: &str,
    cfg: &MaskPolicyConfig,
) -> Result<FimExample, CorpusError> {
    match cfg.policy {
        MaskPolicy::RandomLineSpan => mask_random_line_span(source_path, language, file_text, cfg),
    }
}

/// Prompt context for a FIM runner. Layout:
///
/// ```text
/// ### file: <path>        (one block per context file, in order)
/// <content>
/// ### prefix
/// <prefix>
/// ### suffix
/// <suffix>
/// ```
///
/// Each block body is followed by a newline if it does not already end in
/// one. No model-specific sentinel tokens are inserted.
pub fn assemble_context(ex: &FimExample) -> String {
    fn block(out: &mut String, header: &str, body: &str) {
        out.push_str("### ");
        out.push_str(header);
        out.push('\n');
        out.push_str(body);
        if !body.is_empty() && !body.ends_with('\n') {
            out.push('\n');
        }
    }
    let mut out = String::new();
    for file in &ex.multifile_context {
        block(&mut out, &format!("file: {}", file.path), &file.content);
    }
    block(&mut out, "prefix", &ex.prefix);
    block(&mut out, "suffix", &ex.suffix);
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ExampleRecord {
    source_path: String,
    language: LanguageTag,
    prefix: String,
    middle: String,
    suffix: String,
    context_paths: Vec<String>,
    context_contents: Vec<String>,
}

impl From<&FimExample> for ExampleRecord {
    fn from(ex: &FimExample) -> Self {
        ExampleRecord {
            source_path: ex.source_path.clone(),
            language: ex.language.clone(),
            prefix: ex.prefix.clone(),
            middle: ex.middle.clone(),
            suffix: ex.suffix.clone(),
            context_paths: ex.multifile_context.iter().map(|c| c.path.clone()).collect(),
            context_contents: ex.multifile_context.iter().map(|c| c.content.clone()).collect(),
        }
    }
}

impl TryFrom<ExampleRecord> for FimExample {
    type Error = CorpusError;

    fn try_from(r: ExampleRecord) -> Result<Self, CorpusError> {
        if r.context_paths.len() != r.context_contents.len() {
            return Err(CorpusError::ContextMismatch);
        }
        if r.middle.is_empty() {
            return Err(CorpusError::EmptyMiddle);
        }
        let context = r
            .context_paths
            .into_iter()
            .zip(r.context_contents)
            .map(|(path, content)| ContextFile { path, content })
            .collect();
        FimExample {
            prefix: r.prefix,
            middle: r.middle,
            suffix: r.suffix,
            multifile_context: Vec::new(),
            language: r.language,
            source_path: r.source_path,
        }
        .with_context(context)
    }
}

/// Writes one line per example; returns the number written.
pub fn export_examples<W: Write>(examples: &[FimExample], out: W) -> Result<usize, CorpusError> {
    let rows: Vec<ExampleRecord> = examples.iter().map(ExampleRecord::from).collect();
    Ok(jsonl::write_lines(out, &rows)?)
}

pub fn import_examples<R: BufRead>(reader: R) -> Result<Vec<FimExample>, CorpusError> {
    let rows: Vec<ExampleRecord> = jsonl::read_lines(reader)?;
    rows.into_iter().map(FimExample::try_from).collect()
}
