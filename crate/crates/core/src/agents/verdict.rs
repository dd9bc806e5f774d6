use serde_json::{Map, Value};

use super::scan::first_object;
use crate::context::{ValidationVerdict, VerdictStatus};

/// Appended to every validator prompt.
pub const VERDICT_INSTRUCTION: &str = "\n\nAnswer with one JSON object and nothing else: \
{\"status\": \"found\" or \"not_found\", \"explanation\": <short reason>, \"confidence\": <number between 0 and 1>}";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum VerdictError {
    #[error("no verdict object in reply")]
    NoVerdictFound,
    #[error("status {0:?} is neither found nor not_found")]
    BadStatusValue(String),
    #[error("confidence {0} outside [0,1]")]
    ConfidenceOutOfRange(f64),
    #[error("verdict field {0} missing or mistyped")]
    MissingField(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedVerdict {
    pub verdict: ValidationVerdict,
    /// The reply was not a bare JSON object; the verdict was dug out of prose.
    pub used_fallback: bool,
}

/// Reads the validator reply for one step/window. The whole reply is tried
/// as JSON first, then the first balanced object inside it.
pub fn parse_verdict(
    reply: &str,
    step_no: u64,
    window_start: u64,
    window_end: u64,
) -> Result<ParsedVerdict, VerdictError> {
    let (obj, used_fallback) = match serde_json::from_str::<Value>(reply.trim()) {
        Ok(Value::Object(m)) => (m, false),
        _ => (
            first_object(reply).ok_or(VerdictError::NoVerdictFound)?,
            true,
        ),
    };
    let verdict = verdict_from(&obj, step_no, window_start, window_end)?;
    Ok(ParsedVerdict {
        verdict,
        used_fallback,
    })
}

fn verdict_from(
    obj: &Map<String, Value>,
    step_no: u64,
    window_start: u64,
    window_end: u64,
) -> Result<ValidationVerdict, VerdictError> {
    let status = match obj.get("status") {
        Some(Value::String(s)) => match s.to_ascii_lowercase().as_str() {
            "found" => VerdictStatus::Found,
            "not_found" => VerdictStatus::NotFound,
            _ => return Err(VerdictError::BadStatusValue(s.clone())),
        },
        Some(other) => return Err(VerdictError::BadStatusValue(other.to_string())),
        None => return Err(VerdictError::MissingField("status")),
    };
    let explanation = match obj.get("explanation") {
        Some(Value::String(s)) => s.clone(),
        _ => return Err(VerdictError::MissingField("explanation")),
    };
    let confidence = obj
        .get("confidence")
        .and_then(Value::as_f64)
        .ok_or(VerdictError::MissingField("confidence"))?;
    if !(0.0..=1.0).contains(&confidence) {
        return Err(VerdictError::ConfidenceOutOfRange(confidence));
    }
    Ok(ValidationVerdict {
        status,
        explanation,
        confidence,
        step_no,
        window_start,
        window_end,
    })
}
