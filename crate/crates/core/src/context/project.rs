use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::canonical::compute_hash;
use super::object::{hashed_region, ContextObject, Origin, Provenance};
use super::registry;
use super::schema::Schema;
use super::{ContextError, SCHEMA_VERSION};

/// Which fields of a schema are published downstream.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldSelector {
    pub schema: Schema,
    pub include_paths: Vec<String>,
}

impl FieldSelector {
    pub fn new(schema: Schema, include_paths: impl IntoIterator<Item = impl Into<String>>) -> Self {
        FieldSelector {
            schema,
            include_paths: include_paths.into_iter().map(Into::into).collect(),
        }
    }

    /// Selector naming every top-level field of the schema.
    pub fn full(schema: Schema) -> Self {
        FieldSelector {
            schema,
            include_paths: registry::fields_of(schema)
                .iter()
                .map(|f| f.name.clone())
                .collect(),
        }
    }

    /// Errors for an empty selector or any path that does not resolve.
    pub fn check(&self) -> Result<(), ContextError> {
        if self.include_paths.is_empty() {
            return Err(ContextError::EmptySelector);
        }
        let fields = registry::fields_of(self.schema);
        for p in &self.include_paths {
            if registry::resolve_path(fields, p).is_none() {
                return Err(ContextError::UnresolvablePath(p.clone()));
            }
        }
        Ok(())
    }

    fn normalized(&self) -> Vec<String> {
        let mut paths = self.include_paths.clone();
        paths.sort();
        paths.dedup();
        paths
    }
}

#[derive(Default)]
struct PathTree {
    whole: bool,
    children: BTreeMap<String, PathTree>,
}

impl PathTree {
    fn build(paths: &[String]) -> Self {
        let mut root = PathTree::default();
        for p in paths {
            let mut node = &mut root;
            for seg in p.split('.') {
                node = node.children.entry(seg.to_string()).or_default();
            }
            node.whole = true;
        }
        root
    }
}

fn project_value(value: &Value, tree: &PathTree) -> Value {
    match value {
        Value::Array(items) => Value::Array(items.iter().map(|v| project_value(v, tree)).collect()),
        Value::Object(map) => {
            let mut out = Map::new();
            for (name, sub) in &tree.children {
                if let Some(v) = map.get(name) {
                    let projected = if sub.whole {
                        v.clone()
                    } else {
                        project_value(v, sub)
                    };
                    out.insert(name.clone(), projected);
                }
            }
            Value::Object(out)
        }
        other => other.clone(),
    }
}

/// Projects `object` onto the selected paths, keeping the original origin.
pub fn project(
    object: &ContextObject,
    selector: &FieldSelector,
) -> Result<ContextObject, ContextError> {
    let prov = object.provenance();
    let origin = Origin::new(
        prov.source_node_id.clone(),
        prov.run_id.clone(),
        prov.created_at_us,
    );
    project_as(object, selector, &origin)
}

/// Projects `object` and stamps the result with `origin`. The result's
/// lineage is exactly `[object.hash()]`.
pub fn project_as(
    object: &ContextObject,
    selector: &FieldSelector,
    origin: &Origin,
) -> Result<ContextObject, ContextError> {
    if selector.schema != object.schema() {
        return Err(ContextError::SchemaMismatch {
            expected: selector.schema,
            found: object.schema(),
        });
    }
    selector.check()?;
    let paths = selector.normalized();
    let payload = project_value(object.payload(), &PathTree::build(&paths));
    let content_hash = compute_hash(&hashed_region(
        object.schema(),
        SCHEMA_VERSION,
        &payload,
        Some(&paths),
    ));
    Ok(ContextObject::from_parts(
        object.schema(),
        payload,
        Provenance {
            source_node_id: origin.source_node_id.clone(),
            run_id: origin.run_id.clone(),
            created_at_us: origin.created_at_us,
            content_hash,
            parent_hashes: vec![object.hash().to_string()],
        },
        Some(paths),
    ))
}
