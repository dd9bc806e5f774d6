//! The workflow-graph document: six node kinds, typed ports, structural
//! validation and deterministic topological ordering.

pub mod document;
pub mod model;
pub mod params;
pub mod ports;
pub mod topo;
pub mod validate;

pub use document::{
    graph_from_value, parse_graph_document, serialize_graph, GraphError, GraphErrorKind,
};
pub use model::*;
pub use params::{RetrievalParams, ValidationParams};
pub use ports::{default_ports, default_ports_for_kind};
pub use topo::{find_cycle, topo_order, CycleDetected};
pub use validate::{validate_graph, Diagnostic, DiagnosticCode};
