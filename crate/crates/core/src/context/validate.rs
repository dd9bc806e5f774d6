use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::canonical::is_hex_digest;
use super::object::ContextObject;
use super::registry::{self, check_fields};
use super::schema::Schema;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    UnknownSchema,
    MissingField,
    ExtraField,
    WrongType,
    RangeViolation,
    InvariantBreach,
    HashMismatch,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub path: String,
    pub kind: ViolationKind,
    pub message: String,
}

impl Violation {
    pub fn new(path: String, kind: ViolationKind, message: String) -> Self {
        Violation {
            path,
            kind,
            message,
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.message)
    }
}

/// Outcome of [`validate_object`]: empty means ok.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn messages(&self) -> Vec<String> {
        self.violations.iter().map(|v| v.message.clone()).collect()
    }
}

/// Collects every violation of a constructed object, including a stale
/// content hash.
pub fn validate_object(object: &ContextObject) -> ValidationReport {
    let mut violations = Vec::new();
    validate_payload_into(
        object.schema().as_str(),
        object.schema_version(),
        object.payload(),
        object.selection().is_some(),
        &mut violations,
    );
    let prov = object.provenance();
    if prov.source_node_id.is_empty() {
        violations.push(Violation::new(
            "provenance.source_node_id".into(),
            ViolationKind::MissingField,
            "provenance.source_node_id is empty".into(),
        ));
    }
    if !is_hex_digest(&prov.content_hash) {
        violations.push(Violation::new(
            "provenance.content_hash".into(),
            ViolationKind::WrongType,
            "provenance.content_hash is not a lowercase sha-256 hex digest".into(),
        ));
    } else if prov.content_hash != object.recompute_hash() {
        violations.push(Violation::new(
            "provenance.content_hash".into(),
            ViolationKind::HashMismatch,
            "provenance.content_hash does not match payload".into(),
        ));
    }
    for (i, parent) in prov.parent_hashes.iter().enumerate() {
        if !is_hex_digest(parent) {
            violations.push(Violation::new(
                format!("provenance.parent_hashes[{i}]"),
                ViolationKind::WrongType,
                format!("parent hash {parent:?} is not a hex digest"),
            ));
        }
    }
    if let Some(sel) = object.selection() {
        let fields = registry::fields_of(object.schema());
        for p in sel {
            if registry::resolve_path(fields, p).is_none() {
                violations.push(Violation::new(
                    "selection".into(),
                    ViolationKind::InvariantBreach,
                    format!("selection path {p:?} does not resolve"),
                ));
            }
        }
    }
    ValidationReport { violations }
}

/// Validates a payload for a schema given by id. Unknown ids and versions
/// are reported rather than failing.
pub fn validate_payload(schema: &str, version: &str, payload: &Value) -> ValidationReport {
    let mut violations = Vec::new();
    validate_payload_into(schema, version, payload, false, &mut violations);
    ValidationReport { violations }
}

pub(crate) fn validate_payload_into(
    schema: &str,
    version: &str,
    payload: &Value,
    partial: bool,
    out: &mut Vec<Violation>,
) {
    let Some(def) = registry::lookup(schema, version) else {
        out.push(Violation::new(
            "schema".into(),
            ViolationKind::UnknownSchema,
            format!("unregistered schema {schema}@{version}"),
        ));
        return;
    };
    check_fields(&def.fields, payload, "", partial, out);
    if let Ok(s) = schema.parse::<Schema>() {
        check_invariants(s, payload, out);
    }
}

fn check_invariants(schema: Schema, payload: &Value, out: &mut Vec<Violation>) {
    let u = |key: &str| payload.get(key).and_then(Value::as_u64);
    match schema {
        Schema::LogWindow => {
            let start = u("start_index");
            let end = u("end_index");
            if let (Some(s), Some(e)) = (start, end) {
                if s > e {
                    out.push(Violation::new(
                        "start_index".into(),
                        ViolationKind::InvariantBreach,
                        format!("start_index {s} exceeds end_index {e}"),
                    ));
                }
            }
            let Some(records) = payload.get("records").and_then(Value::as_array) else {
                return;
            };
            if let (Some(s), Some(e)) = (start, end) {
                let span = e.saturating_sub(s);
                if records.len() as u64 != span {
                    out.push(Violation::new(
                        "records".into(),
                        ViolationKind::InvariantBreach,
                        format!(
                            "records count {} != end_index - start_index {} ({e} - {s})",
                            records.len(),
                            span
                        ),
                    ));
                }
            }
            let mut prev: Option<u64> = None;
            for (i, rec) in records.iter().enumerate() {
                let Some(idx) = rec.get("index").and_then(Value::as_u64) else {
                    continue;
                };
                if let Some(p) = prev {
                    if idx <= p {
                        out.push(Violation::new(
                            format!("records[{i}].index"),
                            ViolationKind::InvariantBreach,
                            format!("records not strictly ascending by index at position {i}"),
                        ));
                    }
                }
                if let (Some(s), Some(e)) = (start, end) {
                    if idx < s || idx >= e {
                        out.push(Violation::new(
                            format!("records[{i}].index"),
                            ViolationKind::InvariantBreach,
                            format!("record index {idx} outside window [{s},{e})"),
                        ));
                    }
                }
                prev = Some(idx);
            }
        }
        Schema::ProceduralFlow => {
            let Some(steps) = payload.get("steps").and_then(Value::as_array) else {
                return;
            };
            if steps.is_empty() {
                out.push(Violation::new(
                    "steps".into(),
                    ViolationKind::InvariantBreach,
                    "steps must be non-empty".into(),
                ));
            }
            for (i, step) in steps.iter().enumerate() {
                if let Some(n) = step.get("step_no").and_then(Value::as_u64) {
                    if n != i as u64 + 1 {
                        out.push(Violation::new(
                            format!("steps[{i}].step_no"),
                            ViolationKind::InvariantBreach,
                            format!("step_no {n} at position {i}, expected {}", i + 1),
                        ));
                    }
                }
            }
        }
        Schema::ValidationVerdict => {
            if let (Some(s), Some(e)) = (u("window_start"), u("window_end")) {
                if s > e {
                    out.push(Violation::new(
                        "window_start".into(),
                        ViolationKind::InvariantBreach,
                        format!("window_start {s} exceeds window_end {e}"),
                    ));
                }
            }
        }
        Schema::MessageRecord | Schema::KpiSample | Schema::ApprovalFlag | Schema::TextBlob => {}
    }
}
