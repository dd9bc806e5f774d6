use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::model::*;
use super::params::{RetrievalParams, ValidationParams};
use super::ports::predicate_branches;
use super::topo::find_cycle;
use crate::context::Schema;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DiagnosticCode {
    InvalidNodeId,
    DuplicateNodeId,
    ConfigKindMismatch,
    DuplicatePort,
    UnknownNode,
    UnknownPort,
    SchemaIncompatible,
    PortOverfed,
    MissingInput,
    CycleDetected,
    NoInputNode,
    NoReachableOutput,
    InvalidBranches,
    BranchPortMissing,
    InvalidParam,
    InvalidConfig,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub code: DiagnosticCode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node: Option<String>,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}: {}", self.code, self.message)
    }
}

fn diag(code: DiagnosticCode, node: Option<&str>, message: String) -> Diagnostic {
    Diagnostic {
        code,
        node: node.map(str::to_string),
        message,
    }
}

/// All structural problems of `graph`. Empty means the engine can start it.
pub fn validate_graph(graph: &WorkflowGraph) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut ids = HashSet::new();
    for n in &graph.nodes {
        if !is_valid_node_id(&n.id) {
            out.push(diag(
                DiagnosticCode::InvalidNodeId,
                Some(&n.id),
                format!("node id {:?} must match [a-z0-9_-]+", n.id),
            ));
        }
        if !ids.insert(n.id.as_str()) {
            out.push(diag(
                DiagnosticCode::DuplicateNodeId,
                Some(&n.id),
                format!("duplicate node id {:?}", n.id),
            ));
        }
        if n.config.kind() != n.kind {
            out.push(diag(
                DiagnosticCode::ConfigKindMismatch,
                Some(&n.id),
                format!(
                    "node {:?} is {} but carries a {} config",
                    n.id,
                    n.kind,
                    n.config.kind()
                ),
            ));
        }
        check_ports(n, &mut out);
        check_config(n, &mut out);
    }

    check_edges(graph, &mut out);

    if let Some(cycle) = find_cycle(graph) {
        out.push(diag(
            DiagnosticCode::CycleDetected,
            cycle.first().map(String::as_str),
            cycle.join(" -> "),
        ));
    }

    let inputs: Vec<&str> = graph
        .nodes
        .iter()
        .filter(|n| n.kind == NodeKind::Input)
        .map(|n| n.id.as_str())
        .collect();
    if inputs.is_empty() {
        out.push(diag(
            DiagnosticCode::NoInputNode,
            None,
            "graph has no input node".into(),
        ));
    }
    let has_output = graph.nodes.iter().any(|n| n.kind == NodeKind::Output);
    if !has_output || !output_reachable(graph, &inputs) {
        out.push(diag(
            DiagnosticCode::NoReachableOutput,
            None,
            "no output node is reachable from an input node".into(),
        ));
    }
    out
}

fn check_ports(n: &NodeSpec, out: &mut Vec<Diagnostic>) {
    for (dir, list) in [("in", &n.ports.inputs), ("out", &n.ports.outputs)] {
        let mut seen = HashSet::new();
        for p in list {
            if !seen.insert(p.name.as_str()) {
                out.push(diag(
                    DiagnosticCode::DuplicatePort,
                    Some(&n.id),
                    format!("node {:?} declares {dir}-port {:?} twice", n.id, p.name),
                ));
            }
        }
    }
}

fn check_config(n: &NodeSpec, out: &mut Vec<Diagnostic>) {
    let id = n.id.as_str();
    let bad = |out: &mut Vec<Diagnostic>, msg: String| {
        out.push(diag(
            DiagnosticCode::InvalidConfig,
            Some(id),
            format!("node {id:?}: {msg}"),
        ))
    };
    match &n.config {
        NodeConfig::Input(_) | NodeConfig::Output(_) => {}
        NodeConfig::Agent(cfg) => {
            for p in cfg.agent.problems() {
                bad(out, p);
            }
            if !matches!(cfg.reply_schema, Schema::TextBlob | Schema::ProceduralFlow) {
                bad(
                    out,
                    format!(
                        "reply_schema {} is not parseable from a reply",
                        cfg.reply_schema
                    ),
                );
            }
        }
        NodeConfig::Telemcp(cfg) => check_selector(id, cfg.selector.as_ref(), out),
        NodeConfig::Logic(cfg) => {
            if cfg.script_ref.is_some() != (cfg.builtin == LogicBuiltin::Custom) {
                bad(
                    out,
                    "script_ref is required for builtin custom and only allowed there".into(),
                );
            }
            let params = match cfg.builtin {
                LogicBuiltin::SlidingWindowValidation => {
                    match &cfg.agent {
                        Some(a) => a.agent.problems().into_iter().for_each(|p| bad(out, p)),
                        None => bad(
                            out,
                            "sliding-window-validation needs a validator agent".into(),
                        ),
                    }
                    ValidationParams::from_params(&cfg.params).err()
                }
                LogicBuiltin::KeywordRetrieval => RetrievalParams::from_params(&cfg.params).err(),
                LogicBuiltin::PcapProcessing => {
                    if cfg.mappers.is_empty() {
                        bad(
                            out,
                            "pcap-processing needs at least one embedded mapper".into(),
                        );
                    }
                    let mut ports = HashSet::new();
                    for m in &cfg.mappers {
                        if m.config.mapper == MapperKind::Passthrough {
                            bad(
                                out,
                                format!("mapper on port {:?} must parse records", m.port),
                            );
                        }
                        if !ports.insert(m.port.as_str()) {
                            bad(out, format!("two mappers share port {:?}", m.port));
                        }
                        check_selector(id, m.config.selector.as_ref(), out);
                    }
                    if let Some(sel) = &cfg.selector {
                        if sel.schema != Schema::MessageRecord {
                            bad(
                                out,
                                "pcap-processing selector must target message-record".into(),
                            );
                        }
                    }
                    check_selector(id, cfg.selector.as_ref(), out);
                    (!cfg.params.is_empty())
                        .then(|| vec!["pcap-processing takes no parameters".to_string()])
                }
                LogicBuiltin::Custom => None,
            };
            for p in params.unwrap_or_default() {
                out.push(diag(
                    DiagnosticCode::InvalidParam,
                    Some(id),
                    format!("node {id:?}: {p}"),
                ));
            }
        }
        NodeConfig::Conditional(cfg) => {
            let (allowed, required) = predicate_branches(cfg.predicate);
            let names: BTreeSet<&str> = cfg.branches.iter().map(String::as_str).collect();
            let unknown: Vec<&str> = names
                .iter()
                .filter(|b| !allowed.contains(b))
                .copied()
                .collect();
            let missing: Vec<&str> = required
                .iter()
                .filter(|b| !names.contains(*b))
                .copied()
                .collect();
            if !unknown.is_empty() || !missing.is_empty() || names.len() != cfg.branches.len() {
                out.push(diag(
                    DiagnosticCode::InvalidBranches,
                    Some(id),
                    format!(
                        "node {id:?}: branches {:?} must cover {:?} within {:?}",
                        cfg.branches, required, allowed
                    ),
                ));
            }
            for b in &cfg.branches {
                if n.ports.output(b).is_none() {
                    out.push(diag(
                        DiagnosticCode::BranchPortMissing,
                        Some(id),
                        format!("node {id:?}: branch {b:?} has no out-port"),
                    ));
                }
            }
        }
    }
}

fn check_selector(
    id: &str,
    sel: Option<&crate::context::FieldSelector>,
    out: &mut Vec<Diagnostic>,
) {
    if let Some(sel) = sel {
        if let Err(e) = sel.check() {
            out.push(diag(
                DiagnosticCode::InvalidConfig,
                Some(id),
                format!("node {id:?}: {e}"),
            ));
        }
    }
}

fn check_edges(graph: &WorkflowGraph, out: &mut Vec<Diagnostic>) {
    let nodes: HashMap<&str, &NodeSpec> = graph.nodes.iter().map(|n| (n.id.as_str(), n)).collect();
    let mut fed: HashMap<(&str, &str), usize> = HashMap::new();
    for e in &graph.edges {
        let from = nodes.get(e.from.node.as_str());
        let to = nodes.get(e.to.node.as_str());
        for (end, node) in [(&e.from, from), (&e.to, to)] {
            if node.is_none() {
                out.push(diag(
                    DiagnosticCode::UnknownNode,
                    Some(&end.node),
                    format!("edge {e} references unknown node {:?}", end.node),
                ));
            }
        }
        let (Some(from), Some(to)) = (from, to) else {
            continue;
        };
        let out_port = from.ports.output(&e.from.port);
        let in_port = to.ports.input(&e.to.port);
        if out_port.is_none() {
            out.push(diag(
                DiagnosticCode::UnknownPort,
                Some(&from.id),
                format!("edge {e}: {:?} has no out-port {:?}", from.id, e.from.port),
            ));
        }
        if in_port.is_none() {
            out.push(diag(
                DiagnosticCode::UnknownPort,
                Some(&to.id),
                format!("edge {e}: {:?} has no in-port {:?}", to.id, e.to.port),
            ));
        }
        if let (Some(op), Some(ip)) = (out_port, in_port) {
            if !op.accepts.compatible_with(&ip.accepts) {
                out.push(diag(
                    DiagnosticCode::SchemaIncompatible,
                    Some(&to.id),
                    format!(
                        "edge {e}: out-port carries {} but in-port accepts {}",
                        op.accepts, ip.accepts
                    ),
                ));
            }
            *fed.entry((to.id.as_str(), ip.name.as_str())).or_default() += 1;
        }
    }
    for n in &graph.nodes {
        for p in &n.ports.inputs {
            let count = fed
                .get(&(n.id.as_str(), p.name.as_str()))
                .copied()
                .unwrap_or(0);
            if count > 1 && !p.multi {
                out.push(diag(
                    DiagnosticCode::PortOverfed,
                    Some(&n.id),
                    format!("in-port {}.{} takes one edge but has {count}", n.id, p.name),
                ));
            }
            if count == 0 && p.required {
                out.push(diag(
                    DiagnosticCode::MissingInput,
                    Some(&n.id),
                    format!("required in-port {}.{} is not connected", n.id, p.name),
                ));
            }
        }
        if let NodeConfig::Logic(cfg) = &n.config {
            if cfg.builtin == LogicBuiltin::PcapProcessing
                && !cfg
                    .mappers
                    .iter()
                    .any(|m| fed.contains_key(&(n.id.as_str(), m.port.as_str())))
            {
                out.push(diag(
                    DiagnosticCode::MissingInput,
                    Some(&n.id),
                    format!("node {:?}: no mapper port is connected", n.id),
                ));
            }
        }
    }
}

fn output_reachable(graph: &WorkflowGraph, inputs: &[&str]) -> bool {
    let mut seen: HashSet<&str> = inputs.iter().copied().collect();
    let mut queue: VecDeque<&str> = inputs.iter().copied().collect();
    while let Some(n) = queue.pop_front() {
        if graph.node(n).is_some_and(|s| s.kind == NodeKind::Output) {
            return true;
        }
        for e in graph.outgoing(n) {
            if seen.insert(e.to.node.as_str()) {
                queue.push_back(e.to.node.as_str());
            }
        }
    }
    false
}
