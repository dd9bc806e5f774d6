//! The JSON graph document: parsing with positional errors, and the
//! inverse serializer.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::model::*;
use super::ports::default_ports;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GraphErrorKind {
    SyntaxError,
    UnknownKind,
    UnknownBuiltin,
    DuplicateNodeId,
    InvalidField,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphError {
    pub kind: GraphErrorKind,
    /// `line L, column C` for syntax errors, otherwise a field path such as `nodes[2].kind`.
    pub location: String,
    pub message: String,
}

impl fmt::Display for GraphError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} at {}: {}", self.kind, self.location, self.message)
    }
}

impl std::error::Error for GraphError {}

fn err(
    kind: GraphErrorKind,
    location: impl Into<String>,
    message: impl Into<String>,
) -> GraphError {
    GraphError {
        kind,
        location: location.into(),
        message: message.into(),
    }
}

/// Parses a graph document, filling default ports. Collects every error it can.
pub fn parse_graph_document(text: &str) -> Result<WorkflowGraph, Vec<GraphError>> {
    let doc: Value = serde_json::from_str(text).map_err(|e| {
        vec![err(
            GraphErrorKind::SyntaxError,
            format!("line {}, column {}", e.line(), e.column()),
            e.to_string(),
        )]
    })?;
    graph_from_value(&doc)
}

pub fn graph_from_value(doc: &Value) -> Result<WorkflowGraph, Vec<GraphError>> {
    let mut errors = Vec::new();
    let Some(root) = doc.as_object() else {
        return Err(vec![err(
            GraphErrorKind::InvalidField,
            "$",
            "document must be an object",
        )]);
    };

    let version = match root.get("version").and_then(Value::as_str) {
        Some(v) if v == GRAPH_VERSION => v.to_string(),
        Some(v) => {
            errors.push(err(
                GraphErrorKind::InvalidField,
                "version",
                format!("unsupported version {v:?}, expected {GRAPH_VERSION:?}"),
            ));
            v.to_string()
        }
        None => {
            errors.push(err(
                GraphErrorKind::InvalidField,
                "version",
                "missing string field",
            ));
            String::new()
        }
    };
    let name = match root.get("name").and_then(Value::as_str) {
        Some(n) => n.to_string(),
        None => {
            errors.push(err(
                GraphErrorKind::InvalidField,
                "name",
                "missing string field",
            ));
            String::new()
        }
    };
    let metadata: BTreeMap<String, String> = match root.get("metadata") {
        None | Some(Value::Null) => BTreeMap::new(),
        Some(v) => typed(v, "metadata", &mut errors).unwrap_or_default(),
    };

    let mut nodes = Vec::new();
    let mut seen = HashSet::new();
    match root.get("nodes").and_then(Value::as_array) {
        Some(list) => {
            for (i, raw) in list.iter().enumerate() {
                if let Some(node) = parse_node(i, raw, &mut errors) {
                    if !seen.insert(node.id.clone()) {
                        errors.push(err(
                            GraphErrorKind::DuplicateNodeId,
                            format!("nodes[{i}].id"),
                            format!("duplicate node id {:?}", node.id),
                        ));
                    }
                    nodes.push(node);
                }
            }
        }
        None => errors.push(err(
            GraphErrorKind::InvalidField,
            "nodes",
            "missing list field",
        )),
    }

    let mut edges = Vec::new();
    match root.get("edges") {
        None => {}
        Some(Value::Array(list)) => {
            for (i, raw) in list.iter().enumerate() {
                if let Some(e) = typed::<Edge>(raw, &format!("edges[{i}]"), &mut errors) {
                    edges.push(e);
                }
            }
        }
        Some(_) => errors.push(err(GraphErrorKind::InvalidField, "edges", "must be a list")),
    }

    if errors.is_empty() {
        Ok(WorkflowGraph {
            version,
            name,
            nodes,
            edges,
            metadata,
        })
    } else {
        Err(errors)
    }
}

fn parse_node(i: usize, raw: &Value, errors: &mut Vec<GraphError>) -> Option<NodeSpec> {
    let at = |field: &str| format!("nodes[{i}].{field}");
    let Some(obj) = raw.as_object() else {
        errors.push(err(
            GraphErrorKind::InvalidField,
            format!("nodes[{i}]"),
            "node must be an object",
        ));
        return None;
    };
    let id = match obj.get("id").and_then(Value::as_str) {
        Some(id) => id.to_string(),
        None => {
            errors.push(err(
                GraphErrorKind::InvalidField,
                at("id"),
                "missing string field",
            ));
            return None;
        }
    };
    let kind = match obj.get("kind").and_then(Value::as_str) {
        Some(k) => match k.parse::<NodeKind>() {
            Ok(kind) => kind,
            Err(_) => {
                errors.push(err(
                    GraphErrorKind::UnknownKind,
                    at("kind"),
                    format!("node {id:?} has unknown kind {k:?}"),
                ));
                return None;
            }
        },
        None => {
            errors.push(err(
                GraphErrorKind::InvalidField,
                at("kind"),
                "missing string field",
            ));
            return None;
        }
    };
    let label = obj
        .get("label")
        .and_then(Value::as_str)
        .unwrap_or_default()
        .to_string();
    let empty = Value::Object(Default::default());
    let raw_config = obj.get("config").unwrap_or(&empty);
    let loc = at("config");

    if kind == NodeKind::Logic {
        match raw_config.get("builtin").and_then(Value::as_str) {
            Some(b) if LogicBuiltin::NAMES.contains(&b) => {}
            Some(b) => {
                errors.push(err(
                    GraphErrorKind::UnknownBuiltin,
                    format!("{loc}.builtin"),
                    format!("node {id:?} has unknown builtin {b:?}"),
                ));
                return None;
            }
            None => {
                errors.push(err(
                    GraphErrorKind::InvalidField,
                    format!("{loc}.builtin"),
                    "missing string field",
                ));
                return None;
            }
        }
    }

    let config = match kind {
        NodeKind::Input => NodeConfig::Input(typed(raw_config, &loc, errors)?),
        NodeKind::Agent => NodeConfig::Agent(typed(raw_config, &loc, errors)?),
        NodeKind::Telemcp => NodeConfig::Telemcp(typed(raw_config, &loc, errors)?),
        NodeKind::Logic => NodeConfig::Logic(typed(raw_config, &loc, errors)?),
        NodeKind::Conditional => NodeConfig::Conditional(typed(raw_config, &loc, errors)?),
        NodeKind::Output => NodeConfig::Output(typed(raw_config, &loc, errors)?),
    };
    let ports = match obj.get("ports") {
        None | Some(Value::Null) => default_ports(&config),
        Some(p) => typed(p, &at("ports"), errors)?,
    };
    Some(NodeSpec {
        id,
        kind,
        label,
        config,
        ports,
    })
}

fn typed<T: DeserializeOwned>(
    v: &Value,
    location: &str,
    errors: &mut Vec<GraphError>,
) -> Option<T> {
    match serde_json::from_value(v.clone()) {
        Ok(t) => Some(t),
        Err(e) => {
            errors.push(err(GraphErrorKind::InvalidField, location, e.to_string()));
            None
        }
    }
}

/// Pretty JSON document for `graph`, ports included.
pub fn serialize_graph(graph: &WorkflowGraph) -> String {
    serde_json::to_string_pretty(graph).expect("graphs serialize infallibly")
}
