use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::spec::AgentSpec;

#[derive(Debug, thiserror::Error)]
pub enum RegistryError {
    #[error("agent {0:?} already exists")]
    Duplicate(String),
    #[error("agent {0:?} not found")]
    NotFound(String),
    #[error("invalid agent: {0}")]
    Invalid(String),
    #[error("agent store: {0}")]
    Io(#[from] std::io::Error),
    #[error("agent store: {0}")]
    Decode(#[from] serde_json::Error),
}

/// An agent definition together with its default prompt template.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentEntry {
    pub spec: AgentSpec,
    #[serde(default)]
    pub prompt_template: String,
}

/// Agent definitions, optionally persisted as one JSON file per agent.
#[derive(Debug, Default)]
pub struct AgentRegistry {
    entries: BTreeMap<String, AgentEntry>,
    dir: Option<PathBuf>,
}

impl AgentRegistry {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Loads every `*.json` in `dir` (created if absent); later changes are
    /// written back.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, RegistryError> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir)?;
        let mut entries = BTreeMap::new();
        for item in fs::read_dir(&dir)? {
            let path = item?.path();
            if path.extension().is_some_and(|e| e == "json") {
                let entry: AgentEntry = serde_json::from_slice(&fs::read(&path)?)?;
                entries.insert(entry.spec.id.clone(), entry);
            }
        }
        Ok(AgentRegistry {
            entries,
            dir: Some(dir),
        })
    }

    fn check(entry: &AgentEntry) -> Result<(), RegistryError> {
        let problems = entry.spec.problems();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(RegistryError::Invalid(problems.join("; ")))
        }
    }

    fn persist(&self, id: &str) -> Result<(), RegistryError> {
        let Some(dir) = &self.dir else { return Ok(()) };
        let path = dir.join(format!("{id}.json"));
        match self.entries.get(id) {
            Some(e) => fs::write(path, serde_json::to_vec_pretty(e)?)?,
            None => {
                if path.exists() {
                    fs::remove_file(path)?;
                }
            }
        }
        Ok(())
    }

    pub fn create(&mut self, entry: AgentEntry) -> Result<&AgentEntry, RegistryError> {
        Self::check(&entry)?;
        let id = entry.spec.id.clone();
        if self.entries.contains_key(&id) {
            return Err(RegistryError::Duplicate(id));
        }
        self.entries.insert(id.clone(), entry);
        self.persist(&id)?;
        Ok(&self.entries[&id])
    }

    pub fn get(&self, id: &str) -> Option<&AgentEntry> {
        self.entries.get(id)
    }

    pub fn list(&self) -> impl Iterator<Item = &AgentEntry> {
        self.entries.values()
    }

    /// Replaces the entry stored under `id`; the id itself cannot change.
    pub fn update(&mut self, id: &str, entry: AgentEntry) -> Result<&AgentEntry, RegistryError> {
        Self::check(&entry)?;
        if entry.spec.id != id {
            return Err(RegistryError::Invalid(format!(
                "agent id {:?} does not match {:?}",
                entry.spec.id, id
            )));
        }
        if !self.entries.contains_key(id) {
            return Err(RegistryError::NotFound(id.to_string()));
        }
        self.entries.insert(id.to_string(), entry);
        self.persist(id)?;
        Ok(&self.entries[id])
    }

    pub fn delete(&mut self, id: &str) -> Result<AgentEntry, RegistryError> {
        let e = self
            .entries
            .remove(id)
            .ok_or_else(|| RegistryError::NotFound(id.to_string()))?;
        self.persist(id)?;
        Ok(e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::AgentRole;

    fn entry(id: &str) -> AgentEntry {
        AgentEntry {
            spec: AgentSpec::new(id, AgentRole::Chat),
            prompt_template: "{{question}}".into(),
        }
    }

    #[test]
    fn crud_round_trip_on_disk() {
        let dir = tempfile::tempdir().unwrap();
        let mut reg = AgentRegistry::open(dir.path()).unwrap();
        reg.create(entry("helper")).unwrap();
        assert!(matches!(
            reg.create(entry("helper")),
            Err(RegistryError::Duplicate(_))
        ));
        let mut changed = entry("helper");
        changed.spec.temperature = 0.5;
        reg.update("helper", changed.clone()).unwrap();

        let reopened = AgentRegistry::open(dir.path()).unwrap();
        assert_eq!(reopened.get("helper"), Some(&changed));

        reg.delete("helper").unwrap();
        assert!(AgentRegistry::open(dir.path())
            .unwrap()
            .get("helper")
            .is_none());
        assert!(matches!(
            reg.delete("helper"),
            Err(RegistryError::NotFound(_))
        ));
    }

    #[test]
    fn rejects_bad_specs() {
        let mut reg = AgentRegistry::in_memory();
        let mut e = entry("x");
        e.spec.top_p = 2.0;
        assert!(matches!(reg.create(e), Err(RegistryError::Invalid(_))));
        reg.create(entry("y")).unwrap();
        assert!(matches!(
            reg.update("y", entry("z")),
            Err(RegistryError::Invalid(_))
        ));
    }
}
