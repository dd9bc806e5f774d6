//! Bundled graphs with their fixtures, compiled into the binary.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agents::{AgentSpec, MockAgents};
use crate::context::ProceduralFlow;
use crate::graph::{parse_graph_document, serialize_graph, NodeConfig, WorkflowGraph};

/// Artifact references of the form `prebuilt:<entry>/<fixture>` resolve to
/// bundled fixtures.
pub const REF_PREFIX: &str = "prebuilt:";

const MANIFEST: &str = include_str!("../../assets/prebuilt/manifest.json");

const AI5GTEST_FILES: [(&str, &[u8]); 8] = [
    (
        "graph.json",
        include_bytes!("../../assets/prebuilt/ai5gtest/graph.json"),
    ),
    (
        "flows.json",
        include_bytes!("../../assets/prebuilt/ai5gtest/flows.json"),
    ),
    (
        "intent.txt",
        include_bytes!("../../assets/prebuilt/ai5gtest/intent.txt"),
    ),
    (
        "registration.trace",
        include_bytes!("../../assets/prebuilt/ai5gtest/registration.trace"),
    ),
    (
        "registration_missing_auth.trace",
        include_bytes!("../../assets/prebuilt/ai5gtest/registration_missing_auth.trace"),
    ),
    (
        "gnb.log",
        include_bytes!("../../assets/prebuilt/ai5gtest/gnb.log"),
    ),
    (
        "tiny.pcap",
        include_bytes!("../../assets/prebuilt/ai5gtest/tiny.pcap"),
    ),
    ("manifest.json", MANIFEST.as_bytes()),
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureInfo {
    pub name: String,
    pub media_type: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub title: String,
    pub graph: String,
    pub flows: String,
    pub fixtures: Vec<FixtureInfo>,
    /// Input node id to artifact reference.
    pub default_bindings: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub entries: Vec<ManifestEntry>,
}

#[derive(Debug, thiserror::Error)]
pub enum PrebuiltError {
    #[error("no prebuilt graph named {0:?}")]
    UnknownEntry(String),
    #[error("fixture {name} digest mismatch")]
    DigestMismatch { name: String },
    #[error("io: {0}")]
    Io(#[from] io::Error),
}

pub fn manifest() -> Manifest {
    serde_json::from_str(MANIFEST).expect("bundled manifest parses")
}

fn files(entry: &str) -> Option<&'static [(&'static str, &'static [u8])]> {
    match entry {
        "ai5gtest" => Some(&AI5GTEST_FILES),
        _ => None,
    }
}

/// Bytes of `<entry>/<file>`.
pub fn resolve_fixture(path: &str) -> Option<&'static [u8]> {
    let (entry, name) = path.split_once('/')?;
    files(entry)?
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, b)| *b)
}

pub fn entry(id: &str) -> Option<ManifestEntry> {
    manifest().entries.into_iter().find(|e| e.id == id)
}

pub fn graph(id: &str) -> Option<WorkflowGraph> {
    let e = entry(id)?;
    let text = std::str::from_utf8(resolve_fixture(&format!("{id}/{}", e.graph))?).ok()?;
    Some(parse_graph_document(text).expect("bundled graph parses"))
}

pub fn flows(id: &str) -> Option<Vec<ProceduralFlow>> {
    let e = entry(id)?;
    let bytes = resolve_fixture(&format!("{id}/{}", e.flows))?;
    Some(serde_json::from_slice(bytes).expect("bundled flow table parses"))
}

pub fn ai5gtest_graph() -> WorkflowGraph {
    graph("ai5gtest").expect("ai5gtest is bundled")
}

/// Mock agents that know every bundled flow table.
pub fn mock_agents() -> MockAgents {
    MockAgents::new(
        manifest()
            .entries
            .iter()
            .flat_map(|e| flows(&e.id).unwrap_or_default()),
    )
}

/// Agent specs embedded in a graph's agent and logic nodes, in node order.
pub fn agent_specs(graph: &WorkflowGraph) -> Vec<AgentSpec> {
    graph
        .nodes
        .iter()
        .filter_map(|n| match &n.config {
            NodeConfig::Agent(a) => Some(a.agent.clone()),
            NodeConfig::Logic(l) => l.agent.as_ref().map(|a| a.agent.clone()),
            _ => None,
        })
        .collect()
}

/// Writes the graph, fixtures, flow table and agent specs of `id` into
/// `dir`. Default bindings in the written manifest point at the written
/// files so the export runs without the bundle.
pub fn export(id: &str, dir: &Path) -> Result<Vec<PathBuf>, PrebuiltError> {
    let e = entry(id).ok_or_else(|| PrebuiltError::UnknownEntry(id.to_string()))?;
    let g = graph(id).ok_or_else(|| PrebuiltError::UnknownEntry(id.to_string()))?;
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut put = |name: &str, bytes: &[u8]| -> io::Result<()> {
        let p = dir.join(name);
        fs::write(&p, bytes)?;
        written.push(p);
        Ok(())
    };
    put(&e.graph, serialize_graph(&g).as_bytes())?;
    for f in &e.fixtures {
        let bytes =
            resolve_fixture(&format!("{id}/{}", f.name)).expect("manifest lists bundled files");
        if hex::encode(Sha256::digest(bytes)) != f.sha256 {
            return Err(PrebuiltError::DigestMismatch {
                name: f.name.clone(),
            });
        }
        put(&f.name, bytes)?;
    }
    let mut agents = serde_json::to_string_pretty(&agent_specs(&g)).expect("specs serialize");
    agents.push('\n');
    put("agents.json", agents.as_bytes())?;
    let mut local = e.clone();
    for r in local.default_bindings.values_mut() {
        if let Some(name) = r
            .strip_prefix(REF_PREFIX)
            .and_then(|p| p.split_once('/'))
            .map(|(_, n)| n)
        {
            *r = name.to_string();
        }
    }
    let mut m = serde_json::to_string_pretty(&local).expect("entry serializes");
    m.push('\n');
    put("manifest.json", m.as_bytes())?;
    Ok(written)
}
