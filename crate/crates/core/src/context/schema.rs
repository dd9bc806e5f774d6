use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Registered TeleMCP schema ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Schema {
    ProceduralFlow,
    LogWindow,
    MessageRecord,
    KpiSample,
    ApprovalFlag,
    ValidationVerdict,
    TextBlob,
}

impl Schema {
    pub const ALL: [Schema; 7] = [
        Schema::ProceduralFlow,
        Schema::LogWindow,
        Schema::MessageRecord,
        Schema::KpiSample,
        Schema::ApprovalFlag,
        Schema::ValidationVerdict,
        Schema::TextBlob,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Schema::ProceduralFlow => "procedural-flow",
            Schema::LogWindow => "log-window",
            Schema::MessageRecord => "message-record",
            Schema::KpiSample => "kpi-sample",
            Schema::ApprovalFlag => "approval-flag",
            Schema::ValidationVerdict => "validation-verdict",
            Schema::TextBlob => "text-blob",
        }
    }
}

impl fmt::Display for Schema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unregistered schema {0:?}")]
pub struct UnknownSchema(pub String);

impl FromStr for Schema {
    type Err = UnknownSchema;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Schema::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| UnknownSchema(s.to_string()))
    }
}
