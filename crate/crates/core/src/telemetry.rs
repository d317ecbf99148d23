//! Interaction-record data model and the line-delimited log loader.
//!
//! One record per line, keys `record_id, timestamp_ms, user_id, project_id,
//! language, token_logprobs, raw_confidence, suggestion_text, final_text,
//! preserved_ratio, outcome`. Optional keys are omitted rather than null.
//! `token_logprobs` are natural-log probabilities.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Pseudo-project assigned to records without a `project_id`.
pub const NO_PROJECT: &str = "_none_";

#[derive(Debug, Error, PartialEq)]
pub enum RecordError {
    #[error("malformed record: {0}")]
    Syntax(String),
    #[error("invalid field `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
}

#[derive(Debug, Error)]
pub enum TelemetryError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {source}")]
    Line {
        line: usize,
        #[source]
        source: RecordError,
    },
    #[error("duplicate record_id `{record_id}` in stream {key}")]
    DuplicateRecord { key: String, record_id: String },
}

/// Programming-language tag. `jupyterpython` folds into [`LanguageTag::Python`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LanguageTag {
    Java,
    Python,
    Kotlin,
    Other(String),
}

impl LanguageTag {
    pub fn as_str(&self) -> &str {
        match self {
            LanguageTag::Java => "java",
            LanguageTag::Python => "python",
            LanguageTag::Kotlin => "kotlin",
            LanguageTag::Other(raw) => raw,
        }
    }
}

impl fmt::Display for LanguageTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Case-insensitive; unknown languages are kept lowercased.
pub fn normalize_language(raw: &str) -> LanguageTag {
    let lower = raw.trim().to_lowercase();
    match lower.as_str() {
        "java" => LanguageTag::Java,
        "python" | "jupyterpython" => LanguageTag::Python,
        "kotlin" => LanguageTag::Kotlin,
        _ => LanguageTag::Other(lower),
    }
}

impl Serialize for LanguageTag {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for LanguageTag {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        Ok(normalize_language(&raw))
    }
}

/// One logged completion event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionRecord {
    pub record_id: String,
    #[serde(rename = "timestamp_ms")]
    pub timestamp: i64,
    pub user_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub project_id: Option<String>,
    pub language: LanguageTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_logprobs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_confidence: Option<f64>,
    #[serde(default)]
    pub suggestion_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preserved_ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome: Option<u8>,
}

impl InteractionRecord {
    pub fn validate(&self) -> Result<(), RecordError> {
        let invalid = |field, reason: &str| {
            Err(RecordError::Invalid {
                field,
                reason: reason.to_string(),
            })
        };
        if self.token_logprobs.is_none() && self.raw_confidence.is_none() {
            return invalid("token_logprobs", "no confidence evidence");
        }
        if self.final_text.is_none() && self.preserved_ratio.is_none() && self.outcome.is_none() {
            return invalid("outcome", "no outcome evidence");
        }
        if let Some(lps) = &self.token_logprobs {
            if lps.is_empty() {
                return invalid("token_logprobs", "empty token list");
            }
            if lps.iter().any(|lp| !lp.is_finite() || *lp > 0.0) {
                return invalid("token_logprobs", "entries must be finite and <= 0");
            }
        }
        if let Some(c) = self.raw_confidence {
            if !(c > 0.0 && c <= 1.0) {
                return invalid("raw_confidence", "raw_confidence out of range");
            }
        }
        if let Some(r) = self.preserved_ratio {
            if !(0.0..=1.0).contains(&r) {
                return invalid("preserved_ratio", "preserved_ratio out of range");
            }
        }
        if let Some(o) = self.outcome {
            if o > 1 {
                return invalid("outcome", "outcome must be 0 or 1");
            }
        }
        Ok(())
    }

    pub fn project_or_none(&self) -> &str {
        self.project_id.as_deref().unwrap_or(NO_PROJECT)
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("record serialization is infallible")
    }
}

/// Parses and validates one log line. Unknown keys are ignored.
pub fn parse_record(line: &str) -> Result<InteractionRecord, RecordError> {
    let record: InteractionRecord = serde_json::from_str(line).map_err(|e| RecordError::Syntax(e.to_string()))?;
    record.validate()?;
    Ok(record)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StreamKeying {
    /// Everything in a single stream.
    Global,
    PerUser,
    PerUserProject,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StreamKey {
    All,
    User(String),
    UserProject(String, String),
}

impl StreamKey {
    pub fn for_record(keying: StreamKeying, user: &str, project: Option<&str>) -> StreamKey {
        match keying {
            StreamKeying::Global => StreamKey::All,
            StreamKeying::PerUser => StreamKey::User(user.to_string()),
            StreamKeying::PerUserProject => {
                StreamKey::UserProject(user.to_string(), project.unwrap_or(NO_PROJECT).to_string())
            }
        }
    }

    /// Whether a record with this user/project belongs to the stream.
    pub fn matches(&self, user: &str, project: Option<&str>) -> bool {
        match self {
            StreamKey::All => true,
            StreamKey::User(u) => u == user,
            StreamKey::UserProject(u, p) => u == user && p == project.unwrap_or(NO_PROJECT),
        }
    }
}

impl fmt::Display for StreamKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StreamKey::All => f.write_str("*"),
            StreamKey::User(u) => f.write_str(u),
            StreamKey::UserProject(u, p) => write!(f, "{u}/{p}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stream {
    pub key: StreamKey,
    pub records: Vec<InteractionRecord>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Skip invalid lines and count them instead of failing on the first one.
    pub skip_invalid: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedStreams {
    /// Streams in ascending key order.
    pub streams: Vec<Stream>,
    pub skipped: usize,
}

impl LoadedStreams {
    pub fn total_records(&self) -> usize {
        self.streams.iter().map(|s| s.records.len()).sum()
    }
}

/// Total order on records: timestamp, then record_id.
pub fn sort_records(records: &mut [InteractionRecord]) {
    records.sort_by(|a, b| {
        a.timestamp
            .cmp(&b.timestamp)
            .then_with(|| a.record_id.cmp(&b.record_id))
    });
}

/// Reads all records from a line-delimited source. Blank lines are ignored.
pub fn read_records<R: BufRead>(
    reader: R,
    opts: LoadOptions,
) -> Result<(Vec<InteractionRecord>, usize), TelemetryError> {
    let mut records = Vec::new();
    let mut skipped = 0;
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| TelemetryError::Io {
            path: PathBuf::from("<reader>"),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        match parse_record(&line) {
            Ok(r) => records.push(r),
            Err(_) if opts.skip_invalid => skipped += 1,
            Err(source) => return Err(TelemetryError::Line { line: idx + 1, source }),
        }
    }
    Ok((records, skipped))
}

/// Groups and orders records into streams.
pub fn group_records(records: Vec<InteractionRecord>, keying: StreamKeying) -> Result<Vec<Stream>, TelemetryError> {
    let mut groups: BTreeMap<StreamKey, Vec<InteractionRecord>> = BTreeMap::new();
    for r in records {
        let key = StreamKey::for_record(keying, &r.user_id, r.project_id.as_deref());
        groups.entry(key).or_default().push(r);
    }
    let mut streams = Vec::with_capacity(groups.len());
    for (key, mut records) in groups {
        sort_records(&mut records);
        let mut seen = HashSet::with_capacity(records.len());
        for r in &records {
            if !seen.insert(r.record_id.as_str()) {
                return Err(TelemetryError::DuplicateRecord {
                    key: key.to_string(),
                    record_id: r.record_id.clone(),
                });
            }
        }
        streams.push(Stream { key, records });
    }
    Ok(streams)
}

pub fn load_stream(path: &Path, keying: StreamKeying, opts: LoadOptions) -> Result<LoadedStreams, TelemetryError> {
    let file = File::open(path).map_err(|source| TelemetryError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let (records, skipped) = read_records(BufReader::new(file), opts).map_err(|e| match e {
        TelemetryError::Io { source, .. } => TelemetryError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    })?;
    Ok(LoadedStreams {
        streams: group_records(records, keying)?,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(extra: &str) -> String {
        format!(
            r#"{{"record_id":"r1","timestamp_ms":10,"user_id":"u1","language":"java","suggestion_text":"x"{extra}}}"#
        )
    }

    #[test]
    fn parses_logprobs_and_outcome() {
        let r = parse_record(&line(r#","token_logprobs":[-0.5,-0.5],"outcome":1"#)).unwrap();
        assert_eq!(r.token_logprobs, Some(vec![-0.5, -0.5]));
        assert_eq!(r.outcome, Some(1));
        assert_eq!(r.language, LanguageTag::Java);
        assert_eq!(r.project_id, None);
    }

    #[test]
    fn rejects_missing_confidence() {
        let err = parse_record(&line(r#","outcome":1"#)).unwrap_err();
        assert!(err.to_string().contains("no confidence evidence"), "{err}");
    }

    #[test]
    fn rejects_out_of_range_confidence() {
        let err = parse_record(&line(r#","raw_confidence":1.3,"outcome":1"#)).unwrap_err();
        assert!(
            matches!(
                err,
                RecordError::Invalid {
                    field: "raw_confidence",
                    ..
                }
            ),
            "{err}"
        );
        assert!(err.to_string().contains("raw_confidence out of range"));
    }

    #[test]
    fn rejects_missing_outcome_evidence_and_bad_fields() {
        assert!(parse_record(&line(r#","raw_confidence":0.5"#)).is_err());
        assert!(parse_record(&line(r#","raw_confidence":0.5,"outcome":2"#)).is_err());
        assert!(parse_record(&line(r#","token_logprobs":[0.1],"outcome":1"#)).is_err());
        assert!(parse_record(&line(r#","token_logprobs":[],"outcome":1"#)).is_err());
        assert!(parse_record(&line(r#","raw_confidence":0.0,"outcome":1"#)).is_err());
        assert!(parse_record(&line(r#","raw_confidence":0.5,"preserved_ratio":1.5"#)).is_err());
    }

    #[test]
    fn unknown_keys_are_ignored() {
        let r = parse_record(&line(r#","raw_confidence":0.5,"outcome":0,"session":"s9""#));
        assert!(r.is_ok());
    }

    #[test]
    fn syntax_error_reports_line_number() {
        let text = format!("{}\n{{not json\n", line(r#","raw_confidence":0.5,"outcome":0"#));
        let err = read_records(text.as_bytes(), LoadOptions::default()).unwrap_err();
        assert!(matches!(
            err,
            TelemetryError::Line {
                line: 2,
                source: RecordError::Syntax(_)
            }
        ));
        let (records, skipped) = read_records(text.as_bytes(), LoadOptions { skip_invalid: true }).unwrap();
        assert_eq!((records.len(), skipped), (1, 1));
    }

    #[test]
    fn language_normalization() {
        assert_eq!(normalize_language("jupyterpython"), LanguageTag::Python);
        assert_eq!(normalize_language("Java"), LanguageTag::Java);
        assert_eq!(normalize_language("KOTLIN"), LanguageTag::Kotlin);
        assert_eq!(normalize_language("haskell"), LanguageTag::Other("haskell".into()));
    }

    fn rec(id: &str, ts: i64, user: &str, project: Option<&str>) -> InteractionRecord {
        InteractionRecord {
            record_id: id.into(),
            timestamp: ts,
            user_id: user.into(),
            project_id: project.map(Into::into),
            language: LanguageTag::Python,
            token_logprobs: None,
            raw_confidence: Some(0.5),
            suggestion_text: String::new(),
            final_text: None,
            preserved_ratio: None,
            outcome: Some(1),
        }
    }

    #[test]
    fn orders_by_timestamp_then_id() {
        let records = vec![rec("c", 5, "u", None), rec("b", 2, "u", None), rec("a", 2, "u", None)];
        let streams = group_records(records, StreamKeying::PerUser).unwrap();
        let ids: Vec<_> = streams[0].records.iter().map(|r| r.record_id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c"]);
    }

    #[test]
    fn per_user_project_keying() {
        let records = vec![
            rec("a", 1, "u1", Some("p1")),
            rec("b", 2, "u1", Some("p2")),
            rec("c", 3, "u1", None),
        ];
        let streams = group_records(records.clone(), StreamKeying::PerUserProject).unwrap();
        let keys: Vec<_> = streams.iter().map(|s| s.key.clone()).collect();
        assert_eq!(
            keys,
            [
                StreamKey::UserProject("u1".into(), NO_PROJECT.into()),
                StreamKey::UserProject("u1".into(), "p1".into()),
                StreamKey::UserProject("u1".into(), "p2".into()),
            ]
        );
        assert_eq!(group_records(records, StreamKeying::PerUser).unwrap().len(), 1);
    }

    #[test]
    fn duplicate_ids_within_a_stream_are_rejected() {
        let records = vec![rec("a", 1, "u1", None), rec("a", 2, "u1", None)];
        assert!(matches!(
            group_records(records, StreamKeying::PerUser),
            Err(TelemetryError::DuplicateRecord { .. })
        ));
        // Same id in different streams is fine.
        let records = vec![rec("a", 1, "u1", None), rec("a", 2, "u2", None)];
        assert!(group_records(records, StreamKeying::PerUser).is_ok());
    }
}
