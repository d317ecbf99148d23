//! Line-delimited JSON helpers shared by the telemetry, ledger, calibrator
//! and corpus file formats.

use std::io::{self, BufRead, Write};

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum JsonlError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

pub fn write_lines<W: Write, T: Serialize>(mut out: W, items: &[T]) -> io::Result<usize> {
    for item in items {
        serde_json::to_writer(&mut out, item)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(items.len())
}

/// Reads one value per non-blank line.
pub fn read_lines<R: BufRead, T: DeserializeOwned>(reader: R) -> Result<Vec<T>, JsonlError> {
    let mut items = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|source| JsonlError::Parse { line: idx + 1, source })?;
        items.push(item);
    }
    Ok(items)
}
