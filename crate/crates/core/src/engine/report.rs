use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde_json::{json, Value};

use super::run::REWORK_MEDIA_TYPE;
use super::state::{EventKind, RunState};
use super::validation::{SummaryDocument, SUMMARY_MEDIA_TYPE};
use crate::context::{TextBlob, VerdictStatus};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReportError {
    #[error("run is {}, not terminal", .0.as_str())]
    RunNotTerminal(super::state::RunStatus),
}

/// Machine-readable section plus a Markdown summary.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub json: Value,
    pub markdown: String,
}

impl Report {
    /// Writes `report.json` and `report.md` into `dir`.
    pub fn write_to(&self, dir: &Path) -> std::io::Result<()> {
        fs::create_dir_all(dir)?;
        let mut text = serde_json::to_string_pretty(&self.json).expect("reports serialize");
        text.push('\n');
        fs::write(dir.join("report.json"), text)?;
        fs::write(dir.join("report.md"), &self.markdown)
    }
}

fn str_of<'a>(v: &'a Value, k: &str) -> &'a str {
    v.get(k).and_then(Value::as_str).unwrap_or("")
}

/// Builds the report from the run's events and store only, so identical
/// logs give identical bytes.
pub fn export_report(state: &RunState) -> Result<Report, ReportError> {
    if !state.status.is_terminal() {
        return Err(ReportError::RunNotTerminal(state.status));
    }
    let mut objects = Vec::new();
    let mut seen = BTreeSet::new();
    let mut validations = Vec::new();
    let mut rework = Vec::new();
    for e in state.events_of(EventKind::ObjectPublished) {
        let hash = str_of(&Value::Object(e.detail.clone()), "hash").to_string();
        let Some(obj) = state.store.get(&hash) else {
            continue;
        };
        if !seen.insert(hash.clone()) {
            continue;
        }
        objects.push(json!({
            "hash": hash,
            "schema": obj.schema().as_str(),
            "node": e.node_id,
            "port": e.detail.get("port"),
            "parents": obj.provenance().parent_hashes,
        }));
        let Ok(blob) = obj.decode_payload::<TextBlob>() else {
            continue;
        };
        match blob.media_type.as_deref() {
            Some(SUMMARY_MEDIA_TYPE) => {
                if let Ok(doc) = serde_json::from_str::<SummaryDocument>(&blob.text) {
                    validations.push((e.node_id.clone().unwrap_or_default(), doc));
                }
            }
            Some(REWORK_MEDIA_TYPE) => rework.push(json!({
                "node": e.node_id,
                "hash": hash,
                "rework": serde_json::from_str::<Value>(&blob.text).unwrap_or(Value::String(blob.text.clone())),
            })),
            _ => {}
        }
    }

    let approvals: Vec<Value> = state
        .events_of(EventKind::ApprovalReceived)
        .map(|e| {
            let mut v = Value::Object(e.detail.clone());
            v["node"] = json!(e.node_id);
            v
        })
        .collect();
    let branches: Vec<Value> = state
        .events_of(EventKind::BranchTaken)
        .map(|e| json!({"node": e.node_id, "branch": e.detail.get("branch"), "connected": e.detail.get("connected")}))
        .collect();
    let debug: Vec<Value> = state
        .events_of(EventKind::AgentInvoked)
        .filter(|e| e.detail.get("role").and_then(Value::as_str) == Some("debug"))
        .map(|e| json!({"node": e.node_id, "agent_id": e.detail.get("agent_id"), "reply": e.detail.get("reply"), "error": e.detail.get("error")}))
        .collect();
    let validation_json: Vec<Value> = validations
        .iter()
        .map(|(node, doc)| {
            let steps: Vec<Value> = doc
                .summary
                .per_step
                .iter()
                .map(|v| {
                    let step = doc.flow.steps.iter().find(|s| s.step_no == v.step_no);
                    json!({
                        "step_no": v.step_no,
                        "protocol": step.map(|s| s.protocol.as_str()),
                        "name": step.map(|s| s.name.as_str()),
                        "direction": step.and_then(|s| s.direction).map(|d| d.as_str()),
                        "status": v.status.as_str(),
                        "confidence": v.confidence,
                        "explanation": v.explanation,
                        "window_start": v.window_start,
                        "window_end": v.window_end,
                    })
                })
                .collect();
            json!({
                "node": node,
                "test_id": doc.flow.test_id,
                "aggregate": doc.summary.aggregate.as_str(),
                "windows_examined": doc.summary.windows_examined,
                "steps": steps,
            })
        })
        .collect();

    let json = json!({
        "run_id": state.run_id,
        "graph": state.graph_ref,
        "status": state.status.as_str(),
        "reason": state.reason,
        "notes": state.notes,
        "started_at_us": state.events.first().map(|e| e.at_us),
        "finished_at_us": state.events.last().map(|e| e.at_us),
        "event_count": state.events.len(),
        "node_status": state.node_status,
        "approvals": approvals,
        "branches": branches,
        "validation": validation_json,
        "debug": debug,
        "rework": rework,
        "objects": objects,
    });

    let markdown = render_markdown(state, &json, &validations);
    Ok(Report { json, markdown })
}

fn render_markdown(
    state: &RunState,
    json: &Value,
    validations: &[(String, SummaryDocument)],
) -> String {
    let mut md = String::new();
    let _ = writeln!(md, "# Run report: {}\n", state.graph_ref.name);
    let _ = writeln!(md, "- Run: `{}`", state.run_id);
    let _ = writeln!(md, "- Status: **{}**", state.status.as_str());
    if let Some(r) = &state.reason {
        let _ = writeln!(md, "- Reason: {r}");
    }
    for n in &state.notes {
        let _ = writeln!(md, "- Note: {n}");
    }
    let _ = writeln!(md, "- Events: {}", state.events.len());

    if let Some(approvals) = json["approvals"].as_array().filter(|a| !a.is_empty()) {
        md.push_str("\n## Approval\n\n");
        for a in approvals {
            let verb = if a["approved"].as_bool() == Some(true) {
                "Approved"
            } else {
                "Rejected"
            };
            let comment = str_of(a, "comment");
            let _ = write!(
                md,
                "- {verb} by {} at `{}`",
                str_of(a, "reviewer"),
                str_of(a, "node")
            );
            if !comment.is_empty() {
                let _ = write!(md, ": {comment}");
            }
            md.push('\n');
        }
    }

    for (node, doc) in validations {
        let found = doc
            .summary
            .per_step
            .iter()
            .filter(|v| v.status == VerdictStatus::Found)
            .count();
        let _ = writeln!(md, "\n## Validation: {} (`{node}`)\n", doc.flow.test_id);
        let _ = writeln!(
            md,
            "Aggregate: **{}**. Steps found: {found}/{}. Windows examined: {}.\n",
            doc.summary.aggregate.as_str(),
            doc.summary.per_step.len(),
            doc.summary.windows_examined
        );
        md.push_str(
            "| Step | Protocol | Message | Dir | Status | Confidence | Window | Explanation |\n",
        );
        md.push_str("|---:|---|---|---|---|---:|---|---|\n");
        for v in &doc.summary.per_step {
            let step = doc.flow.steps.iter().find(|s| s.step_no == v.step_no);
            let _ = writeln!(
                md,
                "| {} | {} | {} | {} | {} | {:.2} | [{}, {}) | {} |",
                v.step_no,
                step.map_or("", |s| s.protocol.as_str()),
                step.map_or("", |s| s.name.as_str()),
                step.and_then(|s| s.direction).map_or("", |d| d.as_str()),
                v.status.as_str(),
                v.confidence,
                v.window_start,
                v.window_end,
                v.explanation.replace('|', "\\|"),
            );
        }
    }

    if let Some(debug) = json["debug"].as_array().filter(|a| !a.is_empty()) {
        md.push_str("\n## Debug analysis\n");
        for d in debug {
            let _ = writeln!(
                md,
                "\n`{}` ({}):\n",
                str_of(d, "node"),
                str_of(d, "agent_id")
            );
            let body = d["reply"].as_str().or(d["error"].as_str()).unwrap_or("");
            for line in body.lines() {
                let _ = writeln!(md, "> {line}");
            }
        }
    }

    if let Some(rework) = json["rework"].as_array().filter(|a| !a.is_empty()) {
        md.push_str("\n## Rework\n\n");
        for r in rework {
            let body = &r["rework"];
            let _ = writeln!(
                md,
                "- `{}` from {}: {} (rejected: {})",
                &str_of(r, "hash")[..12.min(str_of(r, "hash").len())],
                str_of(body, "reviewer"),
                str_of(body, "comment"),
                body["rejected"]
                    .as_array()
                    .map(|a| a
                        .iter()
                        .filter_map(Value::as_str)
                        .map(|h| &h[..12.min(h.len())])
                        .collect::<Vec<_>>()
                        .join(", "))
                    .unwrap_or_default()
            );
        }
    }

    if let Some(branches) = json["branches"].as_array().filter(|a| !a.is_empty()) {
        md.push_str("\n## Branches\n\n");
        for b in branches {
            let unconnected = if b["connected"].as_bool() == Some(false) {
                " (not connected)"
            } else {
                ""
            };
            let _ = writeln!(
                md,
                "- `{}` took {}{unconnected}",
                str_of(b, "node"),
                str_of(b, "branch")
            );
        }
    }

    let _ = writeln!(
        md,
        "\n## Objects\n\n{} objects published.",
        json["objects"].as_array().map_or(0, Vec::len)
    );
    md
}
