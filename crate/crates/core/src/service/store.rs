//! Graph documents and chat transcripts, kept in memory and optionally
//! mirrored to a data directory.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::agents::ChatMessage;
use crate::graph::{graph_from_value, WorkflowGraph};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct GraphFile {
    id: String,
    graph: Value,
    #[serde(default)]
    default_bindings: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    prebuilt: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoredGraph {
    pub id: String,
    pub graph: WorkflowGraph,
    pub default_bindings: BTreeMap<String, String>,
    /// Catalog entry this graph was instantiated from.
    pub prebuilt: Option<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("a graph named {0:?} already exists")]
    DuplicateName(String),
    #[error("store: {0}")]
    Io(#[from] io::Error),
}

/// Lowercase id derived from a graph name.
pub fn slug(name: &str) -> String {
    let s: String = name
        .chars()
        .map(|c| match c.to_ascii_lowercase() {
            c @ ('a'..='z' | '0'..='9' | '_' | '-') => c,
            _ => '-',
        })
        .collect();
    if s.is_empty() {
        "graph".into()
    } else {
        s
    }
}

#[derive(Debug, Default)]
pub struct GraphStore {
    graphs: BTreeMap<String, StoredGraph>,
    dir: Option<PathBuf>,
}

impl GraphStore {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Loads `*.json` graph files from `dir`; unreadable ones are skipped
    /// with a warning.
    pub fn open(dir: impl AsRef<Path>) -> io::Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir)?;
        let mut graphs = BTreeMap::new();
        for item in fs::read_dir(&dir)? {
            let path = item?.path();
            if path.extension().is_none_or(|e| e != "json") {
                continue;
            }
            let parsed = fs::read(&path)
                .map_err(|e| e.to_string())
                .and_then(|b| serde_json::from_slice::<GraphFile>(&b).map_err(|e| e.to_string()))
                .and_then(|f| {
                    let graph = graph_from_value(&f.graph).map_err(|e| format!("{e:?}"))?;
                    Ok(StoredGraph {
                        id: f.id,
                        graph,
                        default_bindings: f.default_bindings,
                        prebuilt: f.prebuilt,
                    })
                });
            match parsed {
                Ok(g) => {
                    graphs.insert(g.id.clone(), g);
                }
                Err(e) => tracing::warn!("skipping {}: {e}", path.display()),
            }
        }
        Ok(GraphStore {
            graphs,
            dir: Some(dir),
        })
    }

    pub fn get(&self, id: &str) -> Option<&StoredGraph> {
        self.graphs.get(id)
    }

    pub fn list(&self) -> impl Iterator<Item = &StoredGraph> {
        self.graphs.values()
    }

    fn name_taken(&self, name: &str) -> bool {
        self.graphs.values().any(|g| g.graph.name == name)
    }

    /// Stores a graph under an id derived from its name. Names are unique.
    pub fn insert(
        &mut self,
        graph: WorkflowGraph,
        default_bindings: BTreeMap<String, String>,
        prebuilt: Option<String>,
    ) -> Result<String, StoreError> {
        if self.name_taken(&graph.name) {
            return Err(StoreError::DuplicateName(graph.name));
        }
        let base = slug(&graph.name);
        let mut id = base.clone();
        let mut n = 1;
        while self.graphs.contains_key(&id) {
            n += 1;
            id = format!("{base}-{n}");
        }
        let stored = StoredGraph {
            id: id.clone(),
            graph,
            default_bindings,
            prebuilt,
        };
        self.persist(&stored)?;
        self.graphs.insert(id.clone(), stored);
        Ok(id)
    }

    /// `base`, or `base-2`, `base-3`, ... whichever is free as a name.
    pub fn free_name(&self, base: &str) -> String {
        let mut name = base.to_string();
        let mut n = 1;
        while self.name_taken(&name) {
            n += 1;
            name = format!("{base}-{n}");
        }
        name
    }

    fn persist(&self, g: &StoredGraph) -> io::Result<()> {
        let Some(dir) = &self.dir else { return Ok(()) };
        let file = GraphFile {
            id: g.id.clone(),
            graph: serde_json::to_value(&g.graph).expect("graphs serialize"),
            default_bindings: g.default_bindings.clone(),
            prebuilt: g.prebuilt.clone(),
        };
        fs::write(
            dir.join(format!("{}.json", g.id)),
            serde_json::to_vec_pretty(&file)?,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatExchange {
    pub at_us: i64,
    pub messages: Vec<ChatMessage>,
    pub reply: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub latency_ms: u64,
}

/// Per-agent chat history, appended as JSON lines when a directory is set.
#[derive(Debug, Default)]
pub struct Transcripts {
    by_agent: BTreeMap<String, Vec<ChatExchange>>,
    dir: Option<PathBuf>,
}

impl Transcripts {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn open(dir: impl AsRef<Path>) -> io::Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir)?;
        let mut by_agent = BTreeMap::new();
        for item in fs::read_dir(&dir)? {
            let path = item?.path();
            let (Some(stem), Some("jsonl")) = (
                path.file_stem().and_then(|s| s.to_str()),
                path.extension().and_then(|s| s.to_str()),
            ) else {
                continue;
            };
            let text = fs::read_to_string(&path)?;
            let items: Vec<ChatExchange> = text
                .lines()
                .filter_map(|l| serde_json::from_str(l).ok())
                .collect();
            by_agent.insert(stem.to_string(), items);
        }
        Ok(Transcripts {
            by_agent,
            dir: Some(dir),
        })
    }

    pub fn get(&self, agent_id: &str) -> &[ChatExchange] {
        self.by_agent.get(agent_id).map_or(&[], Vec::as_slice)
    }

    pub fn append(&mut self, agent_id: &str, exchange: ChatExchange) -> io::Result<()> {
        if let Some(dir) = &self.dir {
            let mut f = OpenOptions::new()
                .create(true)
                .append(true)
                .open(dir.join(format!("{agent_id}.jsonl")))?;
            writeln!(f, "{}", serde_json::to_string(&exchange)?)?;
        }
        self.by_agent
            .entry(agent_id.to_string())
            .or_default()
            .push(exchange);
        Ok(())
    }
}
