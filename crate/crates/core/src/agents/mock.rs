//! Deterministic stand-ins for the generation, validation and debugging
//! agents. They read the JSON embedded in the rendered prompt, so the
//! prompt-to-reply path is exercised end to end without a model.

use std::collections::BTreeMap;

use serde_json::{json, Map, Value};

use super::prompt::{ChatMessage, ChatRole};
use super::scan::embedded_json;
use super::spec::{AgentRole, AgentSpec};
use crate::context::{to_canonical_string, ProceduralFlow};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MockError {
    #[error("prompt names no known test id")]
    UnknownTestId,
    #[error("prompt carries no {0}")]
    MissingContext(&'static str),
}

/// Mock agents backed by a flow table keyed by test id.
#[derive(Debug, Clone, Default)]
pub struct MockAgents {
    flows: BTreeMap<String, ProceduralFlow>,
}

impl MockAgents {
    pub fn new(flows: impl IntoIterator<Item = ProceduralFlow>) -> Self {
        MockAgents {
            flows: flows.into_iter().map(|f| (f.test_id.clone(), f)).collect(),
        }
    }

    pub fn flows(&self) -> impl Iterator<Item = &ProceduralFlow> {
        self.flows.values()
    }

    pub fn reply(&self, spec: &AgentSpec, messages: &[ChatMessage]) -> Result<String, MockError> {
        let user = messages
            .iter()
            .rev()
            .find(|m| m.role == ChatRole::User)
            .map_or("", |m| m.content.as_str());
        match spec.role {
            AgentRole::Gen => self.generate(user),
            AgentRole::Val => validate(user),
            AgentRole::Debug => debug(user),
            AgentRole::Chat | AgentRole::Custom => Ok(format!("[mock {}] {}", spec.id, user)),
        }
    }

    fn generate(&self, prompt: &str) -> Result<String, MockError> {
        prompt
            .split(|c: char| !(c.is_ascii_alphanumeric() || c == '-' || c == '_'))
            .find_map(|tok| self.flows.get(tok))
            .map(|f| to_canonical_string(&serde_json::to_value(f).expect("flow serializes")))
            .ok_or(MockError::UnknownTestId)
    }
}

fn str_field<'a>(v: &'a Value, key: &str) -> Option<&'a str> {
    v.get(key).and_then(Value::as_str)
}

fn is_step(m: &Map<String, Value>) -> bool {
    m.contains_key("step_no") && m.contains_key("protocol") && m.contains_key("name")
}

struct WindowView {
    start: u64,
    end: u64,
    records: Vec<Value>,
}

fn window_from(v: &Value) -> Option<WindowView> {
    match v {
        Value::Object(m) => {
            let records = m.get("records")?.as_array()?.clone();
            Some(WindowView {
                start: m.get("start_index")?.as_u64()?,
                end: m.get("end_index")?.as_u64()?,
                records,
            })
        }
        Value::Array(items)
            if items
                .iter()
                .all(|r| r.get("index").is_some_and(Value::is_u64)) =>
        {
            let idx: Vec<u64> = items.iter().filter_map(|r| r["index"].as_u64()).collect();
            Some(WindowView {
                start: idx.iter().copied().min().unwrap_or(0),
                end: idx.iter().copied().max().map_or(0, |m| m + 1),
                records: items.clone(),
            })
        }
        _ => None,
    }
}

fn step_matches(step: &Value, record: &Value) -> bool {
    str_field(step, "protocol") == str_field(record, "protocol")
        && str_field(step, "name") == str_field(record, "name")
        && match str_field(step, "direction") {
            Some(d) => str_field(record, "direction") == Some(d),
            None => true,
        }
}

fn validate(prompt: &str) -> Result<String, MockError> {
    let found = embedded_json(prompt);
    let step = found
        .iter()
        .find(|v| v.as_object().is_some_and(is_step))
        .ok_or(MockError::MissingContext("expected step"))?;
    let window = found
        .iter()
        .filter(|v| !v.as_object().is_some_and(is_step))
        .find_map(window_from)
        .ok_or(MockError::MissingContext("log window"))?;
    let hit = window.records.iter().find(|r| step_matches(step, r));
    let reply = match hit {
        Some(r) => json!({
            "status": "found",
            "explanation": format!("matched at index {}", r["index"]),
            "confidence": 1.0,
        }),
        None => json!({
            "status": "not_found",
            "explanation": format!("no match in window [{},{})", window.start, window.end),
            "confidence": 0.0,
        }),
    };
    Ok(to_canonical_string(&reply))
}

/// Record name in `records` with the smallest edit distance to `target`;
/// ties go to the earliest record.
pub fn nearest_name<'a>(
    target: &str,
    records: impl IntoIterator<Item = &'a str>,
) -> Option<(&'a str, usize)> {
    let mut best: Option<(&str, usize)> = None;
    for name in records {
        let d = strsim::levenshtein(target, name);
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((name, d));
        }
    }
    best
}

fn debug(prompt: &str) -> Result<String, MockError> {
    let failures = embedded_json(prompt)
        .into_iter()
        .find_map(|v| v.get("failures").and_then(Value::as_array).cloned())
        .ok_or(MockError::MissingContext("validation failures"))?;
    if failures.is_empty() {
        return Ok("No failed steps.".to_string());
    }
    let mut lines = Vec::new();
    for f in &failures {
        let step = &f["step"];
        let name = str_field(step, "name").unwrap_or("?");
        let window = window_from(&f["window"]);
        let (start, end, records) =
            window.map_or((0, 0, Vec::new()), |w| (w.start, w.end, w.records));
        let nearest = nearest_name(name, records.iter().filter_map(|r| str_field(r, "name")));
        let near = match nearest {
            Some((n, d)) => format!("nearest record name {n} (edit distance {d})"),
            None => "window is empty".to_string(),
        };
        lines.push(format!(
            "Step {} {} {}{} not found in window [{},{}): {}.",
            step["step_no"],
            str_field(step, "protocol").unwrap_or("?"),
            name,
            str_field(step, "direction")
                .map(|d| format!(" {d}"))
                .unwrap_or_default(),
            start,
            end,
            near
        ));
    }
    Ok(lines.join("\n"))
}
