use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};

use serde_json::{json, Map, Value};

use super::artifacts::ArtifactResolver;
use super::clock::{Clock, SystemClock};
use super::mapping::{apply_mapper, merge_tagged};
use super::retrieval::exec_retrieval;
use super::state::{
    EventKind, GraphRef, NodeStatus, PendingApproval, RunEvent, RunState, RunStatus,
};
use super::validation::{
    exec_validation_loop, LoopError, SummaryDocument, WindowOutcome, WindowValidator,
    SUMMARY_MEDIA_TYPE,
};
use crate::agents::scan::first_object;
use crate::agents::{
    parse_verdict, render_prompt, AgentBackend, AgentReply, AgentSpec, ChatMessage, PromptBindings,
    VERDICT_INSTRUCTION,
};
use crate::context::{
    compute_hash, make_object, make_typed, project_as, to_canonical_bytes, to_canonical_string,
    validate_payload, ApprovalFlag, ContextObject, ExpectedStep, LogWindow, MessageRecord, Origin,
    Payload, ProceduralFlow, Schema, TextBlob, SCHEMA_VERSION,
};
use crate::graph::{
    topo_order, validate_graph, ConditionalConfig, Diagnostic, Edge, InputConfig, LogicBuiltin,
    LogicConfig, MapperKind, MediaType, NodeConfig, NodeSpec, Predicate, RetrievalParams,
    TeleMcpConfig, ValidationParams, WorkflowGraph,
};
use crate::ingest::{parse_pcap, reindex};

/// media_type of the text-blob published when a reviewer rejects a flow.
pub const REWORK_MEDIA_TYPE: &str = "application/x-rework+json";

#[derive(Clone, Default)]
pub struct RunOptions {
    /// Fixed run id; a random one is drawn when absent.
    pub run_id: Option<String>,
    /// Cancel the run if an approval stays pending longer than this.
    pub approval_deadline_ms: Option<u64>,
    /// Answers this run's agent calls instead of the engine's backend.
    pub backend: Option<Arc<dyn AgentBackend>>,
}

impl std::fmt::Debug for RunOptions {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RunOptions")
            .field("run_id", &self.run_id)
            .field("approval_deadline_ms", &self.approval_deadline_ms)
            .field("backend", &self.backend.as_ref().map(|_| ".."))
            .finish()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StartError {
    #[error("graph is invalid: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidGraph(Vec<Diagnostic>),
    #[error("input node {0} is not bound")]
    UnboundInput(String),
    #[error("binding {0} does not name an input node")]
    UnknownBinding(String),
    #[error("artifact {reference} unavailable: {reason}")]
    ArtifactMissing { reference: String, reason: String },
    #[error("event log: {0}")]
    EventLog(String),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ApprovalError {
    #[error("run is {}, not awaiting approval", .0.as_str())]
    WrongState(RunStatus),
    #[error("invalid approval flag: {0}")]
    InvalidFlag(String),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("run is already {}", .0.as_str())]
pub struct WrongState(pub RunStatus);

/// One workflow execution. State changes go through the internal lock;
/// readers may snapshot at any time.
pub struct Run {
    run_id: String,
    graph: WorkflowGraph,
    order: Vec<String>,
    artifacts: BTreeMap<String, Vec<u8>>,
    deadline_ms: Option<u64>,
    backend: Option<Arc<dyn AgentBackend>>,
    clock: Arc<dyn Clock>,
    state: Mutex<RunState>,
    log: Option<Mutex<File>>,
    executing: AtomicBool,
    cancel_requested: AtomicBool,
}

impl std::fmt::Debug for Run {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Run")
            .field("run_id", &self.run_id)
            .finish_non_exhaustive()
    }
}

enum NodeOutcome {
    Done(Map<String, Value>),
    AwaitApproval(Vec<String>),
    Cancelled,
}

type NodeResult = Result<NodeOutcome, String>;

fn detail(v: Value) -> Map<String, Value> {
    match v {
        Value::Object(m) => m,
        _ => Map::new(),
    }
}

pub fn graph_hash(graph: &WorkflowGraph) -> String {
    compute_hash(&to_canonical_bytes(
        &serde_json::to_value(graph).expect("graphs serialize"),
    ))
}

impl Run {
    pub fn id(&self) -> &str {
        &self.run_id
    }

    pub fn graph(&self) -> &WorkflowGraph {
        &self.graph
    }

    fn lock(&self) -> MutexGuard<'_, RunState> {
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Copy of the current state, events and store included.
    pub fn snapshot(&self) -> RunState {
        self.lock().clone()
    }

    pub fn status(&self) -> RunStatus {
        self.lock().status
    }

    /// Events with `seq > since`, at most `limit` of them.
    pub fn events_since(&self, since: u64, limit: usize) -> Vec<RunEvent> {
        let st = self.lock();
        st.events
            .iter()
            .skip(since as usize)
            .take(limit)
            .cloned()
            .collect()
    }

    pub fn is_executing(&self) -> bool {
        self.executing.load(Ordering::SeqCst)
    }

    fn emit(
        &self,
        st: &mut RunState,
        node: Option<&str>,
        kind: EventKind,
        detail: Map<String, Value>,
    ) {
        let event = RunEvent {
            seq: st.events.len() as u64 + 1,
            at_us: self.clock.now_us(),
            node_id: node.map(str::to_string),
            kind,
            detail,
        };
        if let Some(log) = &self.log {
            let line =
                to_canonical_string(&serde_json::to_value(&event).expect("events serialize"));
            let mut f = log.lock().unwrap_or_else(|e| e.into_inner());
            if let Err(e) = writeln!(f, "{line}") {
                tracing::warn!(run = %self.run_id, "event log write failed: {e}");
            }
        }
        st.events.push(event);
    }

    fn publish(
        &self,
        st: &mut RunState,
        node: &str,
        port: Option<&str>,
        object: ContextObject,
    ) -> String {
        let hash = object.hash().to_string();
        let d = json!({
            "hash": hash,
            "schema": object.schema().as_str(),
            "port": port,
            "object": object.to_document(),
        });
        st.store.entry(hash.clone()).or_insert(object);
        if let Some(p) = port {
            st.ports
                .entry(format!("{node}.{p}"))
                .or_default()
                .push(hash.clone());
        }
        self.emit(st, Some(node), EventKind::ObjectPublished, detail(d));
        hash
    }

    fn finish(&self, st: &mut RunState, status: RunStatus, reason: Option<String>) {
        st.status = status;
        if reason.is_some() {
            st.reason = reason;
        }
        st.pending_approval = None;
        let d = json!({"status": status.as_str(), "reason": st.reason, "notes": st.notes});
        self.emit(st, None, EventKind::RunFinished, detail(d));
    }

    /// Rebuilds a run from its event log. The run keeps no artifacts, so
    /// only runs whose inputs have already executed can continue.
    pub fn from_events(
        events: Vec<RunEvent>,
        clock: Arc<dyn Clock>,
        log_path: Option<&Path>,
    ) -> Result<Run, String> {
        let first = events.first().ok_or("empty event log")?;
        if first.kind != EventKind::RunStarted {
            return Err("event log does not begin with run_started".into());
        }
        let graph = crate::graph::graph_from_value(
            first.detail.get("graph").ok_or("run_started lacks graph")?,
        )
        .map_err(|e| format!("stored graph: {e:?}"))?;
        let run_id = first
            .detail
            .get("run_id")
            .and_then(Value::as_str)
            .ok_or("run_started lacks run_id")?
            .to_string();
        let order = topo_order(&graph).map_err(|e| e.to_string())?;
        let mut st = empty_state(&run_id, &graph);
        for (i, e) in events.iter().enumerate() {
            if e.seq != i as u64 + 1 {
                return Err(format!("event {} has seq {}", i + 1, e.seq));
            }
            apply_event(&mut st, e)?;
        }
        st.events = events;
        let log = match log_path {
            Some(p) => Some(Mutex::new(
                OpenOptions::new()
                    .append(true)
                    .open(p)
                    .map_err(|e| e.to_string())?,
            )),
            None => None,
        };
        Ok(Run {
            run_id,
            graph,
            order,
            artifacts: BTreeMap::new(),
            deadline_ms: None,
            backend: None,
            clock,
            state: Mutex::new(st),
            log,
            executing: AtomicBool::new(false),
            cancel_requested: AtomicBool::new(false),
        })
    }
}

fn empty_state(run_id: &str, graph: &WorkflowGraph) -> RunState {
    RunState {
        run_id: run_id.to_string(),
        graph_ref: GraphRef {
            name: graph.name.clone(),
            hash: graph_hash(graph),
        },
        status: RunStatus::Pending,
        node_status: graph
            .nodes
            .iter()
            .map(|n| (n.id.clone(), NodeStatus::Idle))
            .collect(),
        store: BTreeMap::new(),
        pending_approval: None,
        ports: BTreeMap::new(),
        branches: BTreeMap::new(),
        reason: None,
        notes: Vec::new(),
        events: Vec::new(),
    }
}

fn apply_event(st: &mut RunState, e: &RunEvent) -> Result<(), String> {
    let node = e.node_id.clone().unwrap_or_default();
    let s = |k: &str| e.detail.get(k).and_then(Value::as_str).map(str::to_string);
    match e.kind {
        EventKind::RunStarted => st.status = RunStatus::Running,
        EventKind::NodeStarted => {
            st.node_status.insert(node, NodeStatus::Running);
        }
        EventKind::NodeFinished => {
            let skipped = e
                .detail
                .get("skipped")
                .and_then(Value::as_bool)
                .unwrap_or(false);
            st.node_status.insert(
                node,
                if skipped {
                    NodeStatus::Skipped
                } else {
                    NodeStatus::Done
                },
            );
        }
        EventKind::NodeError => {
            st.node_status.insert(node, NodeStatus::Error);
        }
        EventKind::ObjectPublished => {
            let doc = e
                .detail
                .get("object")
                .ok_or("object_published lacks object")?;
            let obj: ContextObject =
                serde_json::from_value(doc.clone()).map_err(|e| e.to_string())?;
            let hash = obj.hash().to_string();
            st.store.entry(hash.clone()).or_insert(obj);
            if let Some(p) = s("port") {
                st.ports
                    .entry(format!("{node}.{p}"))
                    .or_default()
                    .push(hash);
            }
        }
        EventKind::AgentInvoked => {}
        EventKind::ApprovalRequested => {
            let pending: PendingApproval = serde_json::from_value(Value::Object(e.detail.clone()))
                .map_err(|e| e.to_string())?;
            st.pending_approval = Some(pending);
            st.status = RunStatus::AwaitingApproval;
        }
        EventKind::ApprovalReceived => {
            st.pending_approval = None;
            st.status = RunStatus::Running;
        }
        EventKind::BranchTaken => {
            let branch = s("branch").ok_or("branch_taken lacks branch")?;
            if let Some(Value::Array(hashes)) = e.detail.get("passed") {
                let entry = st.ports.entry(format!("{node}.{branch}")).or_default();
                entry.extend(hashes.iter().filter_map(Value::as_str).map(str::to_string));
            }
            st.branches.insert(node, branch);
        }
        EventKind::RunFinished => {
            st.status =
                serde_json::from_value(e.detail.get("status").cloned().unwrap_or(Value::Null))
                    .map_err(|e| e.to_string())?;
            st.reason = s("reason");
            st.pending_approval = None;
            if let Some(Value::Array(notes)) = e.detail.get("notes") {
                st.notes = notes
                    .iter()
                    .filter_map(Value::as_str)
                    .map(str::to_string)
                    .collect();
            }
        }
    }
    Ok(())
}

/// Owns agent access, artifact loading and the set of live runs.
pub struct Engine {
    backend: Arc<dyn AgentBackend>,
    resolver: Arc<dyn ArtifactResolver>,
    clock: Arc<dyn Clock>,
    runs_dir: Option<PathBuf>,
    runs: Mutex<BTreeMap<String, Arc<Run>>>,
}

impl Engine {
    pub fn new(backend: Arc<dyn AgentBackend>, resolver: Arc<dyn ArtifactResolver>) -> Self {
        Engine {
            backend,
            resolver,
            clock: Arc::new(SystemClock),
            runs_dir: None,
            runs: Mutex::new(BTreeMap::new()),
        }
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    /// Persist each run's events as `<dir>/<run_id>.jsonl`.
    pub fn with_runs_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.runs_dir = Some(dir.into());
        self
    }

    pub fn clock(&self) -> &Arc<dyn Clock> {
        &self.clock
    }

    pub fn run(&self, run_id: &str) -> Option<Arc<Run>> {
        self.runs
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .get(run_id)
            .cloned()
    }

    pub fn run_ids(&self) -> Vec<String> {
        self.runs
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .keys()
            .cloned()
            .collect()
    }

    /// Loads every persisted event log in the runs directory. Returns the
    /// number of runs restored; unreadable logs are skipped with a warning.
    pub fn restore_runs(&self) -> std::io::Result<usize> {
        let Some(dir) = &self.runs_dir else {
            return Ok(0);
        };
        if !dir.exists() {
            return Ok(0);
        }
        let mut n = 0;
        for entry in fs::read_dir(dir)? {
            let path = entry?.path();
            if path.extension().is_none_or(|e| e != "jsonl") {
                continue;
            }
            let restored = read_event_log(&path)
                .and_then(|ev| Run::from_events(ev, self.clock.clone(), Some(&path)));
            match restored {
                Ok(run) => {
                    self.runs
                        .lock()
                        .unwrap_or_else(|e| e.into_inner())
                        .insert(run.run_id.clone(), Arc::new(run));
                    n += 1;
                }
                Err(e) => tracing::warn!("skipping {}: {e}", path.display()),
            }
        }
        Ok(n)
    }

    /// Validates the graph and bindings, loads artifacts and emits
    /// `run_started`. Nothing executes until [`Engine::execute`].
    pub fn start_run(
        &self,
        graph: WorkflowGraph,
        bindings: &BTreeMap<String, String>,
        options: RunOptions,
    ) -> Result<Arc<Run>, StartError> {
        let diagnostics = validate_graph(&graph);
        if !diagnostics.is_empty() {
            return Err(StartError::InvalidGraph(diagnostics));
        }
        for name in bindings.keys() {
            if !matches!(
                graph.node(name).map(|n| &n.config),
                Some(NodeConfig::Input(_))
            ) {
                return Err(StartError::UnknownBinding(name.clone()));
            }
        }
        let mut artifacts = BTreeMap::new();
        for node in &graph.nodes {
            if let NodeConfig::Input(_) = node.config {
                let reference = bindings
                    .get(&node.id)
                    .ok_or_else(|| StartError::UnboundInput(node.id.clone()))?;
                let bytes = self.resolver.load(reference).map_err(|reason| {
                    StartError::ArtifactMissing {
                        reference: reference.clone(),
                        reason,
                    }
                })?;
                artifacts.insert(node.id.clone(), bytes);
            }
        }
        let order = topo_order(&graph).expect("validated graphs are acyclic");
        let run_id = options
            .run_id
            .clone()
            .unwrap_or_else(|| uuid::Uuid::new_v4().to_string());
        let log = match &self.runs_dir {
            Some(dir) => {
                fs::create_dir_all(dir).map_err(|e| StartError::EventLog(e.to_string()))?;
                let f = OpenOptions::new()
                    .create_new(true)
                    .append(true)
                    .open(dir.join(format!("{run_id}.jsonl")))
                    .map_err(|e| StartError::EventLog(e.to_string()))?;
                Some(Mutex::new(f))
            }
            None => None,
        };
        let st = empty_state(&run_id, &graph);
        let run = Arc::new(Run {
            run_id: run_id.clone(),
            graph,
            order,
            artifacts,
            deadline_ms: options.approval_deadline_ms,
            backend: options.backend.clone(),
            clock: self.clock.clone(),
            state: Mutex::new(st),
            log,
            executing: AtomicBool::new(false),
            cancel_requested: AtomicBool::new(false),
        });
        {
            let mut st = run.lock();
            st.status = RunStatus::Running;
            let d = json!({
                "run_id": run_id,
                "graph_name": st.graph_ref.name,
                "graph_hash": st.graph_ref.hash,
                "bindings": bindings,
                "graph": run.graph,
            });
            run.emit(&mut st, None, EventKind::RunStarted, detail(d));
        }
        self.runs
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .insert(run_id, run.clone());
        Ok(run)
    }

    /// Executes ready nodes in topological order until the run pauses for
    /// approval or ends. Returns at once if another thread is executing.
    pub fn execute(&self, run: &Run) -> RunStatus {
        if run.executing.swap(true, Ordering::SeqCst) {
            return run.status();
        }
        let status = self.execute_inner(run);
        run.executing.store(false, Ordering::SeqCst);
        status
    }

    fn execute_inner(&self, run: &Run) -> RunStatus {
        for id in &run.order {
            let node = run.graph.node(id).expect("order lists graph nodes");
            {
                let mut st = run.lock();
                if st.status != RunStatus::Running {
                    return st.status;
                }
                if run.cancel_requested.load(Ordering::SeqCst) {
                    run.finish(&mut st, RunStatus::Cancelled, Some("cancelled".into()));
                    return st.status;
                }
                if st.node_status[id] != NodeStatus::Idle {
                    continue;
                }
                if should_skip(&run.graph, &st, node) {
                    st.node_status.insert(id.clone(), NodeStatus::Skipped);
                    run.emit(
                        &mut st,
                        Some(id),
                        EventKind::NodeFinished,
                        detail(json!({"skipped": true})),
                    );
                    continue;
                }
                st.node_status.insert(id.clone(), NodeStatus::Running);
                run.emit(&mut st, Some(id), EventKind::NodeStarted, Map::new());
            }
            let ctx = NodeCtx {
                engine: self,
                run,
                node,
            };
            let outcome = ctx.exec();
            let mut st = run.lock();
            match outcome {
                Ok(NodeOutcome::Done(mut d)) => {
                    st.node_status.insert(id.clone(), NodeStatus::Done);
                    let outputs: Map<String, Value> = node
                        .ports
                        .outputs
                        .iter()
                        .map(|p| (p.name.clone(), json!(st.on_port(id, &p.name))))
                        .collect();
                    d.insert("outputs".into(), Value::Object(outputs));
                    run.emit(&mut st, Some(id), EventKind::NodeFinished, d);
                }
                Ok(NodeOutcome::AwaitApproval(exposed)) => {
                    let deadline_us = run
                        .deadline_ms
                        .map(|ms| run.clock.now_us() + ms as i64 * 1000);
                    let pending = PendingApproval {
                        node_id: id.clone(),
                        exposed,
                        deadline_us,
                    };
                    st.status = RunStatus::AwaitingApproval;
                    let d = serde_json::to_value(&pending).expect("pending approval serializes");
                    st.pending_approval = Some(pending);
                    run.emit(&mut st, Some(id), EventKind::ApprovalRequested, detail(d));
                    return st.status;
                }
                Ok(NodeOutcome::Cancelled) => {
                    st.node_status.insert(id.clone(), NodeStatus::Error);
                    run.finish(&mut st, RunStatus::Cancelled, Some("cancelled".into()));
                    return st.status;
                }
                Err(e) => {
                    st.node_status.insert(id.clone(), NodeStatus::Error);
                    run.emit(
                        &mut st,
                        Some(id),
                        EventKind::NodeError,
                        detail(json!({"error": e})),
                    );
                }
            }
        }
        let mut st = run.lock();
        if st.status == RunStatus::Running {
            let errored: Vec<&String> = st
                .node_status
                .iter()
                .filter(|(_, s)| **s == NodeStatus::Error)
                .map(|(k, _)| k)
                .collect();
            if !errored.is_empty() {
                let reason = format!(
                    "node_error in {}",
                    errored
                        .iter()
                        .map(|s| s.as_str())
                        .collect::<Vec<_>>()
                        .join(", ")
                );
                run.finish(&mut st, RunStatus::Failed, Some(reason));
            } else if st.reason.is_some() {
                run.finish(&mut st, RunStatus::Failed, None);
            } else {
                run.finish(&mut st, RunStatus::Succeeded, None);
            }
        }
        st.status
    }

    /// Records a reviewer decision. The caller resumes with
    /// [`Engine::execute`].
    pub fn resolve_approval(
        &self,
        run: &Run,
        flag: ApprovalFlag,
    ) -> Result<RunStatus, ApprovalError> {
        let report = validate_payload(
            Schema::ApprovalFlag.as_str(),
            SCHEMA_VERSION,
            &flag.to_value(),
        );
        if !report.is_ok() {
            return Err(ApprovalError::InvalidFlag(report.messages().join("; ")));
        }
        let mut st = run.lock();
        if st.status != RunStatus::AwaitingApproval {
            return Err(ApprovalError::WrongState(st.status));
        }
        let pending = st
            .pending_approval
            .clone()
            .expect("awaiting approval has a pending record");
        let node = pending.node_id.as_str();
        let origin = Origin::new(node, &run.run_id, run.clock.now_us());
        let flag_obj = make_typed(&flag, &origin, pending.exposed.clone())
            .map_err(|e| ApprovalError::InvalidFlag(e.to_string()))?;
        let d =
            json!({"approved": flag.approved, "reviewer": flag.reviewer, "comment": flag.comment});
        run.emit(&mut st, Some(node), EventKind::ApprovalReceived, detail(d));
        st.pending_approval = None;
        st.status = RunStatus::Running;
        let flag_hash = run.publish(&mut st, node, None, flag_obj);

        let branch = if flag.approved { "approve" } else { "reject" };
        let connected = run.graph.outgoing(node).any(|e| e.from.port == branch);
        let passed: Vec<String> = if flag.approved {
            pending.exposed.clone()
        } else {
            let rework = json!({
                "reviewer": flag.reviewer,
                "comment": flag.comment,
                "rejected": pending.exposed,
            });
            let blob = TextBlob::typed(to_canonical_string(&rework), REWORK_MEDIA_TYPE);
            let mut parents = pending.exposed.clone();
            parents.push(flag_hash);
            let obj = make_typed(&blob, &origin, parents).expect("rework blob is valid");
            vec![run.publish(&mut st, node, Some(branch), obj)]
        };
        st.branches.insert(node.to_string(), branch.to_string());
        let mut d = json!({"branch": branch, "connected": connected});
        if flag.approved {
            st.ports
                .entry(format!("{node}.{branch}"))
                .or_default()
                .extend(passed.iter().cloned());
            d["passed"] = json!(passed);
        }
        if !flag.approved && !connected {
            st.reason = Some("rejected".into());
        }
        run.emit(&mut st, Some(node), EventKind::BranchTaken, detail(d));
        st.node_status.insert(node.to_string(), NodeStatus::Done);
        let outputs = json!({ branch: st.on_port(node, branch) });
        run.emit(
            &mut st,
            Some(node),
            EventKind::NodeFinished,
            detail(json!({"outputs": outputs})),
        );
        Ok(st.status)
    }

    /// Cancels a run. A paused run ends at once; an executing one stops at
    /// the next node or window boundary.
    pub fn cancel(&self, run: &Run, reason: &str) -> Result<RunStatus, WrongState> {
        let mut st = run.lock();
        if st.status.is_terminal() {
            return Err(WrongState(st.status));
        }
        if run.is_executing() {
            run.cancel_requested.store(true, Ordering::SeqCst);
            return Ok(st.status);
        }
        run.finish(&mut st, RunStatus::Cancelled, Some(reason.to_string()));
        Ok(st.status)
    }

    /// Cancels the run if its pending approval is past its deadline.
    pub fn check_deadline(&self, run: &Run) -> Option<RunStatus> {
        let expired = {
            let st = run.lock();
            st.pending_approval
                .as_ref()
                .and_then(|p| p.deadline_us)
                .is_some_and(|d| self.clock.now_us() >= d)
        };
        if expired {
            self.cancel(run, "approval deadline passed").ok()
        } else {
            None
        }
    }
}

pub fn read_event_log(path: &Path) -> Result<Vec<RunEvent>, String> {
    let text = fs::read_to_string(path).map_err(|e| e.to_string())?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| e.to_string()))
        .collect()
}

fn edge_active(graph: &WorkflowGraph, st: &RunState, edge: &Edge) -> bool {
    let src = &edge.from.node;
    if st.node_status.get(src) != Some(&NodeStatus::Done) {
        return false;
    }
    match graph.node(src).map(|n| &n.config) {
        Some(NodeConfig::Conditional(_)) => st.branches.get(src) == Some(&edge.from.port),
        _ => true,
    }
}

/// A node is skipped when none of its in-edges is active, or when a
/// required in-port is fed only by inactive edges.
fn should_skip(graph: &WorkflowGraph, st: &RunState, node: &NodeSpec) -> bool {
    let incoming: Vec<&Edge> = graph.incoming(&node.id).collect();
    if incoming.is_empty() {
        return false;
    }
    if !incoming.iter().any(|e| edge_active(graph, st, e)) {
        return true;
    }
    node.ports.inputs.iter().filter(|p| p.required).any(|p| {
        let feeding: Vec<&&Edge> = incoming.iter().filter(|e| e.to.port == p.name).collect();
        !feeding.is_empty() && !feeding.iter().any(|e| edge_active(graph, st, e))
    })
}

struct NodeCtx<'a> {
    engine: &'a Engine,
    run: &'a Run,
    node: &'a NodeSpec,
}

impl NodeCtx<'_> {
    fn id(&self) -> &str {
        &self.node.id
    }

    fn origin(&self) -> Origin {
        Origin::new(self.id(), &self.run.run_id, self.run.clock.now_us())
    }

    fn publish(&self, port: Option<&str>, object: ContextObject) -> String {
        let mut st = self.run.lock();
        self.run.publish(&mut st, self.id(), port, object)
    }

    fn emit(&self, kind: EventKind, d: Value) {
        let mut st = self.run.lock();
        self.run.emit(&mut st, Some(self.id()), kind, detail(d));
    }

    fn note(&self, note: String) {
        self.run.lock().notes.push(note);
    }

    fn out_port(&self, default: &str) -> String {
        self.node
            .ports
            .outputs
            .first()
            .map_or_else(|| default.to_string(), |p| p.name.clone())
    }

    /// Objects on active edges into `port`, grouped by source node.
    fn inputs_by_source(&self, port: Option<&str>) -> Vec<(String, Vec<ContextObject>)> {
        let st = self.run.lock();
        let mut groups: Vec<(String, Vec<ContextObject>)> = Vec::new();
        for e in self.run.graph.incoming(self.id()) {
            if port.is_some_and(|p| p != e.to.port) || !edge_active(&self.run.graph, &st, e) {
                continue;
            }
            let objs: Vec<ContextObject> = st
                .objects_on(&e.from.node, &e.from.port)
                .into_iter()
                .cloned()
                .collect();
            match groups.iter_mut().find(|(n, _)| *n == e.from.node) {
                Some((_, v)) => v.extend(objs),
                None => groups.push((e.from.node.clone(), objs)),
            }
        }
        groups
    }

    fn inputs(&self, port: &str) -> Vec<ContextObject> {
        self.inputs_by_source(Some(port))
            .into_iter()
            .flat_map(|(_, v)| v)
            .collect()
    }

    fn cancelled(&self) -> bool {
        self.run.cancel_requested.load(Ordering::SeqCst)
    }

    /// Invokes `agent` and logs one `agent_invoked` event. `check` may
    /// report a problem with the reply text, which is logged with it.
    fn call_agent(
        &self,
        agent: &AgentSpec,
        messages: &[ChatMessage],
        extra: Value,
        check: &dyn Fn(&str) -> Option<String>,
    ) -> Result<AgentReply, String> {
        let mut d = json!({"agent_id": agent.id, "role": agent.role.to_string(), "model_id": agent.model_id});
        if let Value::Object(m) = extra {
            d.as_object_mut().expect("object").extend(m);
        }
        let backend = self.run.backend.as_ref().unwrap_or(&self.engine.backend);
        match backend.complete(agent, messages) {
            Ok(r) => {
                d["prompt_tokens"] = json!(r.prompt_tokens);
                d["completion_tokens"] = json!(r.completion_tokens);
                d["latency_ms"] = json!(r.latency_ms);
                d["reply"] = json!(r.content);
                if let Some(problem) = check(&r.content) {
                    d["parse_error"] = json!(problem);
                }
                self.emit(EventKind::AgentInvoked, d);
                Ok(r)
            }
            Err(e) => {
                d["error"] = json!(e.to_string());
                self.emit(EventKind::AgentInvoked, d);
                Err(format!("agent {}: {e}", agent.id))
            }
        }
    }

    fn exec(&self) -> NodeResult {
        match &self.node.config {
            NodeConfig::Input(cfg) => self.exec_input(cfg),
            NodeConfig::Agent(cfg) => self.exec_agent(cfg),
            NodeConfig::Telemcp(cfg) => self.exec_telemcp(cfg),
            NodeConfig::Logic(cfg) => match cfg.builtin {
                LogicBuiltin::SlidingWindowValidation => self.exec_validation(cfg),
                LogicBuiltin::PcapProcessing => self.exec_pcap_processing(cfg),
                LogicBuiltin::KeywordRetrieval => self.exec_retrieval(cfg),
                LogicBuiltin::Custom => self.exec_custom(cfg),
            },
            NodeConfig::Conditional(cfg) => self.exec_conditional(cfg),
            NodeConfig::Output(_) => {
                let collected: Vec<String> = self
                    .inputs_by_source(None)
                    .into_iter()
                    .flat_map(|(_, v)| v)
                    .map(|o| o.hash().to_string())
                    .collect();
                Ok(NodeOutcome::Done(detail(json!({"collected": collected}))))
            }
        }
    }

    fn exec_input(&self, cfg: &InputConfig) -> NodeResult {
        let bytes = self
            .run
            .artifacts
            .get(self.id())
            .ok_or("artifact not loaded")?;
        let port = self.out_port("artifact");
        let origin = self.origin();
        let mut objects = Vec::new();
        match cfg.media_type {
            MediaType::Text | MediaType::DecodedTrace | MediaType::SrsranLog => {
                let text = std::str::from_utf8(bytes)
                    .map_err(|e| format!("artifact is not UTF-8: {e}"))?;
                let blob = TextBlob::typed(text, cfg.media_type.blob_tag());
                objects.push(make_typed(&blob, &origin, vec![]).map_err(|e| e.to_string())?);
            }
            MediaType::Pcap => {
                let cap = parse_pcap(bytes).map_err(|e| e.to_string())?;
                for r in cap.to_message_records() {
                    objects.push(make_typed(&r, &origin, vec![]).map_err(|e| e.to_string())?);
                }
            }
            MediaType::KpiJson => {
                let text = std::str::from_utf8(bytes)
                    .map_err(|e| format!("artifact is not UTF-8: {e}"))?;
                for (i, line) in text
                    .lines()
                    .enumerate()
                    .filter(|(_, l)| !l.trim().is_empty())
                {
                    let v: Value =
                        serde_json::from_str(line).map_err(|e| format!("line {}: {e}", i + 1))?;
                    objects.push(
                        make_object(Schema::KpiSample, v, &origin, vec![])
                            .map_err(|e| format!("line {}: {e}", i + 1))?,
                    );
                }
            }
        }
        let n = objects.len();
        for o in objects {
            self.publish(Some(&port), o);
        }
        Ok(NodeOutcome::Done(detail(json!({"published": n}))))
    }

    fn exec_agent(&self, cfg: &crate::graph::AgentNodeConfig) -> NodeResult {
        let groups = self.inputs_by_source(None);
        let mut bindings = PromptBindings::new();
        let mut all = Vec::new();
        for (source, objs) in &groups {
            bindings.bind_objects(source.clone(), objs);
            all.extend(objs.iter().cloned());
        }
        bindings.bind_objects("context", &all);
        let messages = render_prompt(&cfg.agent, &cfg.prompt_template, &bindings)
            .map_err(|e| e.to_string())?;
        let schema = cfg.reply_schema;
        let reply = self.call_agent(&cfg.agent, &messages, json!({}), &|c| {
            reply_payload(schema, c).err()
        })?;
        let payload = reply_payload(cfg.reply_schema, &reply.content)?;
        let parents = all.iter().map(|o| o.hash().to_string()).collect();
        let obj = make_object(cfg.reply_schema, payload, &self.origin(), parents)
            .map_err(|e| format!("reply is not a valid {}: {e}", cfg.reply_schema))?;
        self.publish(Some(&self.out_port("reply")), obj);
        Ok(NodeOutcome::Done(Map::new()))
    }

    /// Publishes `records` built from their parents, projected through
    /// `selector` when one is set. Returns the published hashes.
    fn publish_records(
        &self,
        port: &str,
        records: Vec<(MessageRecord, String)>,
        selector: Option<&crate::context::FieldSelector>,
    ) -> Result<(), String> {
        for (r, parent) in records {
            let origin = self.origin();
            let full = make_typed(&r, &origin, vec![parent]).map_err(|e| e.to_string())?;
            match selector {
                Some(sel) => {
                    let projected = project_as(&full, sel, &origin).map_err(|e| e.to_string())?;
                    self.publish(None, full);
                    self.publish(Some(port), projected);
                }
                None => {
                    self.publish(Some(port), full);
                }
            }
        }
        Ok(())
    }

    fn exec_telemcp(&self, cfg: &TeleMcpConfig) -> NodeResult {
        let port = self.out_port("objects");
        let mut skipped = 0;
        for obj in self.inputs("raw") {
            if cfg.mapper == MapperKind::Passthrough {
                match &cfg.selector {
                    Some(sel) => {
                        let p = project_as(&obj, sel, &self.origin()).map_err(|e| e.to_string())?;
                        self.publish(Some(&port), p);
                    }
                    None => {
                        let mut st = self.run.lock();
                        st.ports
                            .entry(format!("{}.{port}", self.id()))
                            .or_default()
                            .push(obj.hash().to_string());
                    }
                }
                continue;
            }
            let mapped =
                apply_mapper(cfg.mapper, cfg.invert_direction, &obj).map_err(|e| e.to_string())?;
            skipped += mapped.skipped_lines;
            let parent = obj.hash().to_string();
            let tagged = mapped
                .records
                .into_iter()
                .map(|r| (r, parent.clone()))
                .collect();
            self.publish_records(&port, tagged, cfg.selector.as_ref())?;
        }
        Ok(NodeOutcome::Done(detail(json!({"skipped_lines": skipped}))))
    }

    fn exec_pcap_processing(&self, cfg: &LogicConfig) -> NodeResult {
        let mut sources = Vec::new();
        let mut skipped = 0;
        let mut bound = 0;
        for m in &cfg.mappers {
            let objs = self.inputs(&m.port);
            bound += objs.len();
            let mut tagged = Vec::new();
            for obj in &objs {
                let mapped = apply_mapper(m.config.mapper, m.config.invert_direction, obj)
                    .map_err(|e| format!("port {}: {e}", m.port))?;
                skipped += mapped.skipped_lines;
                tagged.extend(
                    mapped
                        .records
                        .into_iter()
                        .map(|r| (r, obj.hash().to_string())),
                );
            }
            sources.push((m.config.mapper, tagged));
        }
        if bound == 0 {
            return Err("no trace or log input is bound".into());
        }
        let merged = merge_tagged(sources);
        let n = merged.len();
        self.publish_records(&self.out_port("records"), merged, cfg.selector.as_ref())?;
        Ok(NodeOutcome::Done(detail(
            json!({"records": n, "skipped_lines": skipped}),
        )))
    }

    fn exec_validation(&self, cfg: &LogicConfig) -> NodeResult {
        let params = ValidationParams::from_params(&cfg.params).map_err(|p| p.join("; "))?;
        let agent = cfg
            .agent
            .as_ref()
            .ok_or("sliding-window-validation needs an agent")?;
        let flow_obj = self
            .inputs("flow")
            .into_iter()
            .find(|o| o.schema() == Schema::ProceduralFlow)
            .ok_or("no procedural-flow on the flow port")?;
        let flow: ProceduralFlow = flow_obj.decode_payload().map_err(|e| e.to_string())?;
        let flow_hash = flow_obj.hash().to_string();

        let trace = self.inputs("trace");
        let mut records: Vec<(MessageRecord, String)> = Vec::with_capacity(trace.len());
        for o in &trace {
            let r: MessageRecord = serde_json::from_value(o.payload().clone()).map_err(|e| {
                format!(
                    "trace record {} cannot be validated ({e}); expose protocol, name, timestamp_us, direction and index upstream",
                    &o.hash()[..12]
                )
            })?;
            records.push((r, o.hash().to_string()));
        }
        records.sort_by_key(|(r, _)| r.index);
        let (mut plain, hashes): (Vec<MessageRecord>, Vec<String>) = records.into_iter().unzip();
        reindex(&mut plain);
        let source_id = trace.first().map_or_else(
            || "trace".to_string(),
            |o| o.provenance().source_node_id.clone(),
        );

        let mut validator = NodeValidator {
            ctx: self,
            agent,
            flow: &flow,
            flow_hash: &flow_hash,
            record_hashes: &hashes,
            last_window: BTreeMap::new(),
            error: None,
        };
        let result = match exec_validation_loop(&flow, &plain, &params, &source_id, &mut validator)
        {
            Ok(r) => r,
            Err(LoopError::Cancelled) => return Ok(NodeOutcome::Cancelled),
            Err(LoopError::Agent(e)) => {
                return Err(validator.error.take().unwrap_or_else(|| e.to_string()))
            }
        };
        let verdict_port = "verdicts";
        let mut verdict_hashes = Vec::new();
        for v in &result.summary.per_step {
            let mut parents = vec![flow_hash.clone()];
            parents.extend(validator.last_window.get(&v.step_no).cloned());
            let obj = make_typed(v, &self.origin(), parents).map_err(|e| e.to_string())?;
            verdict_hashes.push(self.publish(Some(verdict_port), obj));
        }
        let doc = SummaryDocument {
            summary: result.summary.clone(),
            flow: flow.clone(),
            failures: result.failures,
        };
        let text = to_canonical_string(&serde_json::to_value(&doc).expect("summary serializes"));
        let blob = TextBlob::typed(text, SUMMARY_MEDIA_TYPE);
        let obj = make_typed(&blob, &self.origin(), verdict_hashes).map_err(|e| e.to_string())?;
        self.publish(Some("summary"), obj);
        Ok(NodeOutcome::Done(detail(json!({
            "aggregate": result.summary.aggregate.as_str(),
            "windows_examined": result.summary.windows_examined,
            "window_starts": result.window_starts,
        }))))
    }

    fn exec_retrieval(&self, cfg: &LogicConfig) -> NodeResult {
        let params = RetrievalParams::from_params(&cfg.params).map_err(|p| p.join("; "))?;
        let query_obj = self.inputs("query").into_iter().next().ok_or("no query")?;
        let query: TextBlob = query_obj.decode_payload().map_err(|e| e.to_string())?;
        let docs = self.inputs("corpus");
        let mut corpus = Vec::with_capacity(docs.len());
        for d in &docs {
            let t: TextBlob = d.decode_payload().map_err(|e| e.to_string())?;
            corpus.push(t.text);
        }
        let ranked =
            exec_retrieval(&query.text, &corpus, params.top_k).map_err(|e| e.to_string())?;
        let port = self.out_port("snippets");
        let mut ranking = Vec::new();
        for s in &ranked {
            let parents = vec![query_obj.hash().to_string(), docs[s.doc].hash().to_string()];
            let obj = make_typed(&TextBlob::plain(s.text.clone()), &self.origin(), parents)
                .map_err(|e| e.to_string())?;
            self.publish(Some(&port), obj);
            ranking.push(json!({"doc": s.doc, "score": s.score}));
        }
        Ok(NodeOutcome::Done(detail(json!({"ranking": ranking}))))
    }

    fn exec_custom(&self, cfg: &LogicConfig) -> NodeResult {
        let port = self.out_port("out");
        let hashes: Vec<String> = self
            .inputs_by_source(None)
            .into_iter()
            .flat_map(|(_, v)| v)
            .map(|o| o.hash().to_string())
            .collect();
        self.run
            .lock()
            .ports
            .entry(format!("{}.{port}", self.id()))
            .or_default()
            .extend(hashes);
        if let Some(script) = &cfg.script_ref {
            self.note(format!(
                "{}: script {script} not executed; inputs passed through",
                self.id()
            ));
        }
        Ok(NodeOutcome::Done(Map::new()))
    }

    fn exec_conditional(&self, cfg: &ConditionalConfig) -> NodeResult {
        let subject = self.inputs("subject");
        let exposed: Vec<String> = subject.iter().map(|o| o.hash().to_string()).collect();
        match cfg.predicate {
            Predicate::HumanApproval => Ok(NodeOutcome::AwaitApproval(exposed)),
            Predicate::VerdictBranch => {
                let doc = subject
                    .iter()
                    .find_map(|o| {
                        let b: TextBlob = o.decode_payload().ok()?;
                        (b.media_type.as_deref() == Some(SUMMARY_MEDIA_TYPE))
                            .then(|| serde_json::from_str::<SummaryDocument>(&b.text).ok())
                            .flatten()
                    })
                    .ok_or("verdict-branch subject carries no validation summary")?;
                let branch = doc.summary.aggregate.as_str();
                let connected = cfg.branches.iter().any(|b| b == branch)
                    && self
                        .run
                        .graph
                        .outgoing(self.id())
                        .any(|e| e.from.port == branch);
                if !connected && cfg.strict {
                    return Err(format!(
                        "MissingBranchPort: branch {branch} has no connected port"
                    ));
                }
                let mut d = json!({"branch": branch, "connected": connected, "passed": exposed});
                {
                    let mut st = self.run.lock();
                    st.branches
                        .insert(self.id().to_string(), branch.to_string());
                    st.ports
                        .entry(format!("{}.{branch}", self.id()))
                        .or_default()
                        .extend(exposed.iter().cloned());
                    if !connected {
                        let note = format!(
                            "{}: branch {branch} is not connected; run ends there",
                            self.id()
                        );
                        st.notes.push(note.clone());
                        d["note"] = json!(note);
                    }
                    self.run
                        .emit(&mut st, Some(self.id()), EventKind::BranchTaken, detail(d));
                }
                Ok(NodeOutcome::Done(Map::new()))
            }
        }
    }
}

/// Reply text to a payload of `schema`: text-blobs wrap the reply, other
/// schemas read the reply (or the first object inside it) as JSON.
fn reply_payload(schema: Schema, content: &str) -> Result<Value, String> {
    if schema == Schema::TextBlob {
        return Ok(TextBlob::plain(content).to_value());
    }
    match serde_json::from_str::<Value>(content.trim()) {
        Ok(v @ Value::Object(_)) => Ok(v),
        _ => first_object(content)
            .map(Value::Object)
            .ok_or_else(|| format!("reply holds no JSON object for {schema}")),
    }
}

struct NodeValidator<'a, 'b> {
    ctx: &'a NodeCtx<'b>,
    agent: &'a crate::graph::AgentNodeConfig,
    flow: &'a ProceduralFlow,
    flow_hash: &'a str,
    record_hashes: &'a [String],
    last_window: BTreeMap<u64, String>,
    error: Option<String>,
}

impl WindowValidator for NodeValidator<'_, '_> {
    fn check(
        &mut self,
        step: &ExpectedStep,
        window: &LogWindow,
    ) -> Result<WindowOutcome, crate::agents::AgentError> {
        let ctx = self.ctx;
        let range = window.start_index as usize..window.end_index as usize;
        let parents: BTreeSet<String> = self.record_hashes[range].iter().cloned().collect();
        let mut parents: Vec<String> = parents.into_iter().collect();
        parents.insert(0, self.flow_hash.to_string());
        let window_obj = make_typed(window, &ctx.origin(), parents)
            .expect("windows over reindexed records are valid");
        let window_hash = ctx.publish(None, window_obj.clone());
        self.last_window.insert(step.step_no, window_hash.clone());

        let mut bindings = PromptBindings::new();
        bindings
            .bind_value(
                "flow",
                serde_json::to_value(self.flow).expect("flow serializes"),
            )
            .bind_value("step", serde_json::to_value(step).expect("step serializes"))
            .bind_object("window", &window_obj);
        let mut template = self.agent.prompt_template.clone();
        template.push_str(VERDICT_INSTRUCTION);
        let messages = render_prompt(&self.agent.agent, &template, &bindings)
            .map_err(|e| crate::agents::AgentError::MalformedResponse(format!("prompt: {e}")))?;
        let extra = json!({
            "step_no": step.step_no,
            "window_start": window.start_index,
            "window_end": window.end_index,
            "window_hash": window_hash,
        });
        let (no, ws, we) = (step.step_no, window.start_index, window.end_index);
        let check = move |c: &str| parse_verdict(c, no, ws, we).err().map(|e| e.to_string());
        let reply = match ctx.call_agent(&self.agent.agent, &messages, extra, &check) {
            Ok(r) => r,
            Err(e) => {
                self.error = Some(e);
                return Err(crate::agents::AgentError::Unreachable(
                    "validator call failed".into(),
                ));
            }
        };
        match parse_verdict(
            &reply.content,
            step.step_no,
            window.start_index,
            window.end_index,
        ) {
            Ok(p) => Ok(WindowOutcome::Verdict(p)),
            Err(e) => {
                ctx.note(format!(
                    "{}: step {} window [{},{}): unreadable verdict ({e})",
                    ctx.id(),
                    step.step_no,
                    window.start_index,
                    window.end_index
                ));
                Ok(WindowOutcome::Unparsed(e))
            }
        }
    }

    fn cancelled(&self) -> bool {
        self.ctx.cancelled()
    }
}
