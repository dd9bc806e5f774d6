//! Decoded-trace format: one JSON object per line with `protocol`, `name`,
//! `timestamp_us`, `direction` and an optional `index`. Stands in for a
//! dissector export.

use std::collections::HashSet;

use serde::Deserialize;

use crate::context::{to_canonical_string, Direction, MessageRecord, Payload, RawRef};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TraceError {
    #[error("line {line_no}: {reason}")]
    MalformedLine { line_no: usize, reason: String },
    #[error("line {line_no}: duplicate index {index}")]
    DuplicateIndex { line_no: usize, index: u64 },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TraceLine {
    protocol: Option<String>,
    name: Option<String>,
    timestamp_us: Option<i64>,
    direction: Option<String>,
    index: Option<u64>,
    raw_ref: Option<RawRef>,
}

/// Parses a decoded trace. Blank lines are ignored; line numbers are 1-based.
pub fn parse_decoded_trace(text: &str) -> Result<Vec<MessageRecord>, TraceError> {
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    let mut ordinal = 0u64;
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |reason: String| TraceError::MalformedLine { line_no, reason };
        let raw: TraceLine = serde_json::from_str(line).map_err(|e| malformed(e.to_string()))?;
        let protocol = token(raw.protocol, "protocol").map_err(malformed)?;
        let name = token(raw.name, "name").map_err(malformed)?;
        let timestamp_us = raw
            .timestamp_us
            .ok_or_else(|| malformed("missing field timestamp_us".into()))?;
        let direction: Direction = raw
            .direction
            .ok_or_else(|| malformed("missing field direction".into()))?
            .parse()
            .map_err(malformed)?;
        let index = raw.index.unwrap_or(ordinal);
        ordinal += 1;
        if !seen.insert(index) {
            return Err(TraceError::DuplicateIndex { line_no, index });
        }
        records.push(MessageRecord {
            protocol,
            name,
            timestamp_us,
            direction,
            index,
            raw_ref: raw.raw_ref,
        });
    }
    records.sort_by_key(|r| r.index);
    Ok(records)
}

fn token(v: Option<String>, field: &str) -> Result<String, String> {
    match v {
        None => Err(format!("missing field {field}")),
        Some(s) if s.is_empty() => Err(format!("field {field} is empty")),
        Some(s) if s.chars().any(char::is_whitespace) => {
            Err(format!("field {field} contains whitespace"))
        }
        Some(s) => Ok(s),
    }
}

/// Inverse of [`parse_decoded_trace`]: one canonical JSON line per record,
/// index included.
pub fn write_decoded_trace(records: &[MessageRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&to_canonical_string(&r.to_value()));
        out.push('\n');
    }
    out
}
