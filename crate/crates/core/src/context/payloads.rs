//! Typed views of the schema payloads.
//!
//! Objects carry their payload as JSON; these structs are the checked,
//! strongly typed form used by the ingest mappers, agents and engine.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::schema::Schema;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "UL")]
    Ul,
    #[serde(rename = "DL")]
    Dl,
    #[serde(rename = "internal")]
    Internal,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Ul => "UL",
            Direction::Dl => "DL",
            Direction::Internal => "internal",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "UL" => Ok(Direction::Ul),
            "DL" => Ok(Direction::Dl),
            "internal" => Ok(Direction::Internal),
            other => Err(format!("unknown direction {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawRef {
    pub offset: u64,
    pub length: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageRecord {
    pub protocol: String,
    pub name: String,
    pub timestamp_us: i64,
    pub direction: Direction,
    pub index: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_ref: Option<RawRef>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogWindow {
    pub source_id: String,
    pub start_index: u64,
    pub end_index: u64,
    pub records: Vec<MessageRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpectedStep {
    pub step_no: u64,
    pub protocol: String,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<Direction>,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProceduralFlow {
    pub test_id: String,
    pub steps: Vec<ExpectedStep>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictStatus {
    Found,
    NotFound,
}

impl VerdictStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            VerdictStatus::Found => "found",
            VerdictStatus::NotFound => "not_found",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationVerdict {
    pub status: VerdictStatus,
    pub explanation: String,
    pub confidence: f64,
    pub step_no: u64,
    pub window_start: u64,
    pub window_end: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApprovalFlag {
    pub approved: bool,
    pub reviewer: String,
    pub comment: String,
    pub decided_at_us: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiSample {
    pub key: String,
    pub value: f64,
    pub unit: String,
    pub timestamp_us: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextBlob {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub media_type: Option<String>,
}

impl TextBlob {
    pub fn plain(text: impl Into<String>) -> Self {
        TextBlob {
            text: text.into(),
            media_type: None,
        }
    }

    pub fn typed(text: impl Into<String>, media_type: impl Into<String>) -> Self {
        TextBlob {
            text: text.into(),
            media_type: Some(media_type.into()),
        }
    }
}

/// Binds a payload struct to its schema id.
pub trait Payload: Serialize + serde::de::DeserializeOwned {
    const SCHEMA: Schema;

    fn to_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("payload structs serialize infallibly")
    }
}

impl Payload for MessageRecord {
    const SCHEMA: Schema = Schema::MessageRecord;
}
impl Payload for LogWindow {
    const SCHEMA: Schema = Schema::LogWindow;
}
impl Payload for ProceduralFlow {
    const SCHEMA: Schema = Schema::ProceduralFlow;
}
impl Payload for ValidationVerdict {
    const SCHEMA: Schema = Schema::ValidationVerdict;
}
impl Payload for ApprovalFlag {
    const SCHEMA: Schema = Schema::ApprovalFlag;
}
impl Payload for KpiSample {
    const SCHEMA: Schema = Schema::KpiSample;
}
impl Payload for TextBlob {
    const SCHEMA: Schema = Schema::TextBlob;
}
