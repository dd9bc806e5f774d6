//! srsRAN-style text logs:
//! `<ISO-8601 timestamp with fractional seconds> [<LAYER>] [<LEVEL>] <message>`.

use regex::Regex;
use serde::{Deserialize, Serialize};
use std::sync::LazyLock;
use time::macros::format_description;
use time::PrimitiveDateTime;

use crate::context::{Direction, MessageRecord};

pub const LAYERS: [&str; 8] = ["PHY", "MAC", "RLC", "PDCP", "RRC", "NAS", "NGAP", "GTPU"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LogLevel {
    D,
    I,
    W,
    E,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogLine {
    pub timestamp_us: i64,
    pub layer: String,
    pub level: LogLevel,
    pub message: String,
    pub line_no: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SrsranParse {
    pub lines: Vec<LogLine>,
    /// 1-based numbers of non-blank lines that did not match the grammar.
    pub skipped: Vec<usize>,
}

impl SrsranParse {
    pub fn skip_count(&self) -> usize {
        self.skipped.len()
    }
}

static LINE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"^(\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2})(?:\.(\d{1,9}))?Z?\s+\[\s*([A-Z0-9]+)\s*\]\s+\[\s*([DIWE])\s*\]\s?(.*)$",
    )
    .expect("log line regex compiles")
});

/// Parses every matching line; others are counted in the skip report.
pub fn parse_srsran_log(text: &str) -> SrsranParse {
    let mut out = SrsranParse::default();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        match parse_line(raw.trim_end(), line_no) {
            Some(l) => out.lines.push(l),
            None => out.skipped.push(line_no),
        }
    }
    out
}

fn parse_line(raw: &str, line_no: usize) -> Option<LogLine> {
    let caps = LINE.captures(raw)?;
    let layer = caps.get(3)?.as_str();
    if !LAYERS.contains(&layer) {
        return None;
    }
    let level = match caps.get(4)?.as_str() {
        "D" => LogLevel::D,
        "I" => LogLevel::I,
        "W" => LogLevel::W,
        "E" => LogLevel::E,
        _ => return None,
    };
    let timestamp_us = parse_timestamp_us(caps.get(1)?.as_str(), caps.get(2).map(|m| m.as_str()))?;
    Some(LogLine {
        timestamp_us,
        layer: layer.to_string(),
        level,
        message: caps.get(5).map_or("", |m| m.as_str()).to_string(),
        line_no,
    })
}

/// Seconds-resolution ISO-8601 (UTC assumed) plus up to nine fraction
/// digits, truncated to microseconds.
pub fn parse_timestamp_us(base: &str, fraction: Option<&str>) -> Option<i64> {
    let fmt = format_description!("[year]-[month]-[day]T[hour]:[minute]:[second]");
    let dt = PrimitiveDateTime::parse(base, fmt).ok()?.assume_utc();
    let micros = match fraction {
        None => 0,
        Some(f) => {
            let mut digits: String = f.chars().take(6).collect();
            while digits.len() < 6 {
                digits.push('0');
            }
            digits.parse::<i64>().ok()?
        }
    };
    Some(dt.unix_timestamp() * 1_000_000 + micros)
}

/// Message records from `Tx <Name>` / `Rx <Name>` lines, in input order.
/// gNB-side logs: Tx is downlink, Rx uplink; `invert` swaps the two.
pub fn extract_message_records(lines: &[LogLine], invert: bool) -> Vec<MessageRecord> {
    let mut out = Vec::new();
    for line in lines {
        let (dir, rest) = if let Some(rest) = line.message.strip_prefix("Tx ") {
            (if invert { Direction::Ul } else { Direction::Dl }, rest)
        } else if let Some(rest) = line.message.strip_prefix("Rx ") {
            (if invert { Direction::Dl } else { Direction::Ul }, rest)
        } else {
            continue;
        };
        let Some(name) = rest
            .split_whitespace()
            .next()
            .map(|t| t.trim_end_matches([':', ',', ';']))
            .filter(|t| !t.is_empty())
        else {
            continue;
        };
        out.push(MessageRecord {
            protocol: line.layer.clone(),
            name: name.to_string(),
            timestamp_us: line.timestamp_us,
            direction: dir,
            index: out.len() as u64,
            raw_ref: None,
        });
    }
    out
}
