use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;

use crate::agents::AgentSpec;
use crate::context::{FieldSelector, Schema};

pub const GRAPH_VERSION: &str = "1.0";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Input,
    Agent,
    Telemcp,
    Logic,
    Conditional,
    Output,
}

impl NodeKind {
    pub const ALL: [NodeKind; 6] = [
        NodeKind::Input,
        NodeKind::Agent,
        NodeKind::Telemcp,
        NodeKind::Logic,
        NodeKind::Conditional,
        NodeKind::Output,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Input => "input",
            NodeKind::Agent => "agent",
            NodeKind::Telemcp => "telemcp",
            NodeKind::Logic => "logic",
            NodeKind::Conditional => "conditional",
            NodeKind::Output => "output",
        }
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NodeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        NodeKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown node kind {s:?}"))
    }
}

/// Schemas a port carries. Serialized as `"any"` or a list of schema ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Accepts {
    Any,
    Schemas(BTreeSet<Schema>),
}

impl Accepts {
    pub fn one(schema: Schema) -> Self {
        Accepts::Schemas(BTreeSet::from([schema]))
    }

    pub fn admits(&self, schema: Schema) -> bool {
        match self {
            Accepts::Any => true,
            Accepts::Schemas(set) => set.contains(&schema),
        }
    }

    pub fn compatible_with(&self, other: &Accepts) -> bool {
        match (self, other) {
            (Accepts::Any, _) | (_, Accepts::Any) => true,
            (Accepts::Schemas(a), Accepts::Schemas(b)) => !a.is_disjoint(b),
        }
    }
}

impl fmt::Display for Accepts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Accepts::Any => f.write_str("any"),
            Accepts::Schemas(set) => {
                let names: Vec<_> = set.iter().map(|s| s.as_str()).collect();
                write!(f, "{{{}}}", names.join(","))
            }
        }
    }
}

impl Serialize for Accepts {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        match self {
            Accepts::Any => ser.serialize_str("any"),
            Accepts::Schemas(set) => set.serialize(ser),
        }
    }
}

impl<'de> Deserialize<'de> for Accepts {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Word(String),
            List(BTreeSet<Schema>),
        }
        match Raw::deserialize(de)? {
            Raw::Word(w) if w == "any" => Ok(Accepts::Any),
            Raw::Word(w) => w
                .parse::<Schema>()
                .map(Accepts::one)
                .map_err(serde::de::Error::custom),
            Raw::List(set) => Ok(Accepts::Schemas(set)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PortDirection {
    In,
    Out,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Port {
    pub name: String,
    pub accepts: Accepts,
    /// In-ports only: more than one edge may feed this port.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub multi: bool,
    /// In-ports only: the node is skipped when every edge into this port is inactive.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub required: bool,
}

impl Port {
    pub fn new(name: &str, accepts: Accepts) -> Self {
        Port {
            name: name.to_string(),
            accepts,
            multi: false,
            required: false,
        }
    }

    pub fn multi(mut self) -> Self {
        self.multi = true;
        self
    }

    pub fn required(mut self) -> Self {
        self.required = true;
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ports {
    #[serde(rename = "in", default)]
    pub inputs: Vec<Port>,
    #[serde(rename = "out", default)]
    pub outputs: Vec<Port>,
}

impl Ports {
    pub fn input(&self, name: &str) -> Option<&Port> {
        self.inputs.iter().find(|p| p.name == name)
    }

    pub fn output(&self, name: &str) -> Option<&Port> {
        self.outputs.iter().find(|p| p.name == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MediaType {
    /// Published as a plain text-blob.
    Text,
    /// Line-delimited JSON message records, published as a text-blob.
    DecodedTrace,
    /// srsRAN-style text log, published as a text-blob.
    SrsranLog,
    /// libpcap capture, parsed into message-record objects.
    Pcap,
    /// Line-delimited JSON KPI samples, parsed into kpi-sample objects.
    KpiJson,
}

impl MediaType {
    /// media_type tag stamped on text-blobs carrying this artifact.
    pub fn blob_tag(self) -> &'static str {
        match self {
            MediaType::Text => "text/plain",
            MediaType::DecodedTrace => "application/x-decoded-trace",
            MediaType::SrsranLog => "text/x-srsran-log",
            MediaType::Pcap => "application/vnd.tcpdump.pcap",
            MediaType::KpiJson => "application/x-kpi-jsonl",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputConfig {
    pub media_type: MediaType,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
}

fn default_reply_schema() -> Schema {
    Schema::TextBlob
}

fn is_text_blob(s: &Schema) -> bool {
    *s == Schema::TextBlob
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentNodeConfig {
    pub agent: AgentSpec,
    pub prompt_template: String,
    /// Schema the reply is parsed into before publishing.
    #[serde(default = "default_reply_schema", skip_serializing_if = "is_text_blob")]
    pub reply_schema: Schema,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MapperKind {
    DecodedTrace,
    SrsranLog,
    Pcap,
    Passthrough,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeleMcpConfig {
    pub mapper: MapperKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selector: Option<FieldSelector>,
    /// Swap the Tx/Rx direction mapping for UE-side logs.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub invert_direction: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LogicBuiltin {
    SlidingWindowValidation,
    PcapProcessing,
    KeywordRetrieval,
    Custom,
}

impl LogicBuiltin {
    pub const NAMES: [&'static str; 4] = [
        "sliding-window-validation",
        "pcap-processing",
        "keyword-retrieval",
        "custom",
    ];
}

/// A TeleMCP mapper embedded in a logic node, fed from one in-port.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedMapper {
    pub port: String,
    #[serde(flatten)]
    pub config: TeleMcpConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogicConfig {
    pub builtin: LogicBuiltin,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub script_ref: Option<String>,
    /// Agent invoked by the builtin (the validator for sliding-window-validation).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent: Option<AgentNodeConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub mappers: Vec<EmbeddedMapper>,
    /// Fields published on the builtin's record output.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selector: Option<FieldSelector>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Predicate {
    HumanApproval,
    VerdictBranch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalConfig {
    pub predicate: Predicate,
    pub branches: Vec<String>,
    /// Reject a taken branch that has no out-port instead of ending the run with a note.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub strict: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum NodeConfig {
    Input(InputConfig),
    Agent(AgentNodeConfig),
    Telemcp(TeleMcpConfig),
    Logic(LogicConfig),
    Conditional(ConditionalConfig),
    Output(OutputConfig),
}

impl NodeConfig {
    pub fn kind(&self) -> NodeKind {
        match self {
            NodeConfig::Input(_) => NodeKind::Input,
            NodeConfig::Agent(_) => NodeKind::Agent,
            NodeConfig::Telemcp(_) => NodeKind::Telemcp,
            NodeConfig::Logic(_) => NodeKind::Logic,
            NodeConfig::Conditional(_) => NodeKind::Conditional,
            NodeConfig::Output(_) => NodeKind::Output,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeSpec {
    pub id: String,
    pub kind: NodeKind,
    #[serde(default)]
    pub label: String,
    pub config: NodeConfig,
    pub ports: Ports,
}

/// `(node id, port name)`; written `"node.port"` in documents.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Endpoint {
    pub node: String,
    pub port: String,
}

impl Endpoint {
    pub fn new(node: &str, port: &str) -> Self {
        Endpoint {
            node: node.to_string(),
            port: port.to_string(),
        }
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.node, self.port)
    }
}

impl FromStr for Endpoint {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once('.') {
            Some((n, p)) if !n.is_empty() && !p.is_empty() && !p.contains('.') => {
                Ok(Endpoint::new(n, p))
            }
            _ => Err(format!("endpoint {s:?} must look like nodeId.portName")),
        }
    }
}

impl Serialize for Endpoint {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        ser.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Endpoint {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let s = String::deserialize(de)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub from: Endpoint,
    pub to: Endpoint,
}

impl Edge {
    pub fn new(from: &str, to: &str) -> Self {
        Edge {
            from: from.parse().expect("valid endpoint literal"),
            to: to.parse().expect("valid endpoint literal"),
        }
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {}", self.from, self.to)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorkflowGraph {
    pub version: String,
    pub name: String,
    pub nodes: Vec<NodeSpec>,
    pub edges: Vec<Edge>,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

impl WorkflowGraph {
    pub fn node(&self, id: &str) -> Option<&NodeSpec> {
        self.nodes.iter().find(|n| n.id == id)
    }

    /// Edges into `node`, in declaration order.
    pub fn incoming<'a>(&'a self, node: &'a str) -> impl Iterator<Item = &'a Edge> + 'a {
        self.edges.iter().filter(move |e| e.to.node == node)
    }

    pub fn outgoing<'a>(&'a self, node: &'a str) -> impl Iterator<Item = &'a Edge> + 'a {
        self.edges.iter().filter(move |e| e.from.node == node)
    }

    pub fn kind_histogram(&self) -> BTreeMap<NodeKind, usize> {
        let mut h = BTreeMap::new();
        for n in &self.nodes {
            *h.entry(n.kind).or_insert(0) += 1;
        }
        h
    }
}

pub fn is_valid_node_id(id: &str) -> bool {
    !id.is_empty()
        && id
            .bytes()
            .all(|b| matches!(b, b'a'..=b'z' | b'0'..=b'9' | b'_' | b'-'))
}
