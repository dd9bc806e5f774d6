use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::context::{is_hex_digest, to_canonical_string, ContextObject};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Pending,
    Running,
    AwaitingApproval,
    Succeeded,
    Failed,
    Cancelled,
}

impl RunStatus {
    pub fn is_terminal(self) -> bool {
        matches!(
            self,
            RunStatus::Succeeded | RunStatus::Failed | RunStatus::Cancelled
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RunStatus::Pending => "pending",
            RunStatus::Running => "running",
            RunStatus::AwaitingApproval => "awaiting_approval",
            RunStatus::Succeeded => "succeeded",
            RunStatus::Failed => "failed",
            RunStatus::Cancelled => "cancelled",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeStatus {
    Idle,
    Running,
    Done,
    Error,
    Skipped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    RunStarted,
    NodeStarted,
    NodeFinished,
    ObjectPublished,
    AgentInvoked,
    ApprovalRequested,
    ApprovalReceived,
    BranchTaken,
    NodeError,
    RunFinished,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEvent {
    pub seq: u64,
    pub at_us: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node_id: Option<String>,
    pub kind: EventKind,
    #[serde(default)]
    pub detail: Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphRef {
    pub name: String,
    pub hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendingApproval {
    pub node_id: String,
    pub exposed: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deadline_us: Option<i64>,
}

/// Observable state of one run. Everything here can be rebuilt from the
/// run's event log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunState {
    pub run_id: String,
    pub graph_ref: GraphRef,
    pub status: RunStatus,
    pub node_status: BTreeMap<String, NodeStatus>,
    /// Objects keyed by content hash.
    #[serde(skip)]
    pub store: BTreeMap<String, ContextObject>,
    pub pending_approval: Option<PendingApproval>,
    /// Hashes available on each `node.port`, in publication order.
    pub ports: BTreeMap<String, Vec<String>>,
    /// Branch taken by each conditional that has decided.
    pub branches: BTreeMap<String, String>,
    /// Why a terminal run failed or was cancelled.
    pub reason: Option<String>,
    pub notes: Vec<String>,
    #[serde(skip)]
    pub events: Vec<RunEvent>,
}

impl RunState {
    pub fn event_count(&self) -> usize {
        self.events.len()
    }

    /// Hashes available on `node.port`, in publication order.
    pub fn on_port(&self, node: &str, port: &str) -> &[String] {
        self.ports
            .get(&format!("{node}.{port}"))
            .map_or(&[], Vec::as_slice)
    }

    /// Objects available on `node.port`.
    pub fn objects_on(&self, node: &str, port: &str) -> Vec<&ContextObject> {
        self.on_port(node, port)
            .iter()
            .filter_map(|h| self.store.get(h))
            .collect()
    }

    pub fn events_of(&self, kind: EventKind) -> impl Iterator<Item = &RunEvent> {
        self.events.iter().filter(move |e| e.kind == kind)
    }
}

/// Keys whose values differ between otherwise identical runs.
const VOLATILE: [&str; 5] = [
    "at_us",
    "run_id",
    "created_at_us",
    "decided_at_us",
    "latency_ms",
];

/// Normalized log as canonical JSON lines: volatile keys are dropped and
/// every content digest is replaced by `#n`, its first-seen ordinal. Digests
/// of objects that embed a wall-clock time (approval flags) therefore
/// compare equal while the parent/child structure is kept.
pub fn normalized_log(events: &[RunEvent]) -> String {
    fn walk(v: &mut Value, seen: &mut BTreeMap<String, usize>) {
        match v {
            Value::Object(m) => {
                for k in VOLATILE {
                    m.remove(k);
                }
                m.values_mut().for_each(|c| walk(c, seen));
            }
            Value::Array(items) => items.iter_mut().for_each(|c| walk(c, seen)),
            Value::String(s) if is_hex_digest(s) => {
                let n = seen.len();
                let id = *seen.entry(s.clone()).or_insert(n);
                *s = format!("#{id}");
            }
            _ => {}
        }
    }
    let mut seen = BTreeMap::new();
    let mut out = String::new();
    for e in events {
        let mut v = serde_json::to_value(e).expect("events serialize");
        walk(&mut v, &mut seen);
        out.push_str(&to_canonical_string(&v));
        out.push('\n');
    }
    out
}
