use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::canonical::{compute_hash, to_canonical_bytes};
use super::payloads::Payload;
use super::registry;
use super::schema::Schema;
use super::validate::{validate_object, validate_payload_into, Violation};
use super::{ContextError, SCHEMA_VERSION};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub source_node_id: String,
    pub run_id: String,
    pub created_at_us: i64,
    pub content_hash: String,
    pub parent_hashes: Vec<String>,
}

/// Who is publishing an object, and when.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Origin {
    pub source_node_id: String,
    pub run_id: String,
    pub created_at_us: i64,
}

impl Origin {
    pub fn new(
        source_node_id: impl Into<String>,
        run_id: impl Into<String>,
        created_at_us: i64,
    ) -> Self {
        Origin {
            source_node_id: source_node_id.into(),
            run_id: run_id.into(),
            created_at_us,
        }
    }
}

/// A TeleMCP context object. Immutable once built; the content hash covers
/// `schema`, `schema_version`, `payload` and the projection selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextObject {
    schema: Schema,
    schema_version: String,
    payload: Value,
    provenance: Provenance,
    /// Paths kept by a projection. `None` for full objects.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    selection: Option<Vec<String>>,
}

impl ContextObject {
    pub fn schema(&self) -> Schema {
        self.schema
    }

    pub fn schema_version(&self) -> &str {
        &self.schema_version
    }

    pub fn payload(&self) -> &Value {
        &self.payload
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn hash(&self) -> &str {
        &self.provenance.content_hash
    }

    pub fn selection(&self) -> Option<&[String]> {
        self.selection.as_deref()
    }

    /// Deserializes the payload into its typed form. Fails for projected
    /// objects missing required fields.
    pub fn decode_payload<T: Payload>(&self) -> Result<T, ContextError> {
        if self.schema != T::SCHEMA {
            return Err(ContextError::SchemaMismatch {
                expected: T::SCHEMA,
                found: self.schema,
            });
        }
        serde_json::from_value(self.payload.clone())
            .map_err(|e| ContextError::Decode(e.to_string()))
    }

    /// Canonical bytes of the hashed region.
    pub fn hashed_region(&self) -> Vec<u8> {
        hashed_region(
            self.schema,
            &self.schema_version,
            &self.payload,
            self.selection.as_deref(),
        )
    }

    pub fn recompute_hash(&self) -> String {
        compute_hash(&self.hashed_region())
    }

    /// Canonical document form of the whole object.
    pub fn to_document(&self) -> Value {
        serde_json::to_value(self).expect("context objects serialize infallibly")
    }

    pub(crate) fn from_parts(
        schema: Schema,
        payload: Value,
        provenance: Provenance,
        selection: Option<Vec<String>>,
    ) -> Self {
        ContextObject {
            schema,
            schema_version: SCHEMA_VERSION.to_string(),
            payload,
            provenance,
            selection,
        }
    }
}

pub(crate) fn hashed_region(
    schema: Schema,
    version: &str,
    payload: &Value,
    selection: Option<&[String]>,
) -> Vec<u8> {
    let mut region = json!({
        "payload": payload,
        "schema": schema.as_str(),
        "schema_version": version,
    });
    if let Some(sel) = selection {
        region["selection"] = json!(sel);
    }
    to_canonical_bytes(&region)
}

/// Canonical bytes of a full object. Refuses objects that fail validation.
pub fn canonicalize(object: &ContextObject) -> Result<Vec<u8>, ContextError> {
    if registry::lookup(object.schema.as_str(), &object.schema_version).is_none() {
        return Err(ContextError::UnregisteredSchema(format!(
            "{}@{}",
            object.schema, object.schema_version
        )));
    }
    let report = validate_object(object);
    if !report.is_ok() {
        return Err(ContextError::PayloadInvalid(report.violations));
    }
    Ok(to_canonical_bytes(&object.to_document()))
}

/// Parses canonical (or any JSON) bytes back into a validated object.
pub fn decode(bytes: &[u8]) -> Result<ContextObject, ContextError> {
    let doc: Value =
        serde_json::from_slice(bytes).map_err(|e| ContextError::Decode(e.to_string()))?;
    if let Some(s) = doc.get("schema").and_then(Value::as_str) {
        s.parse::<Schema>()
            .map_err(|e| ContextError::UnregisteredSchema(e.0))?;
    }
    let object: ContextObject =
        serde_json::from_value(doc).map_err(|e| ContextError::Decode(e.to_string()))?;
    let report = validate_object(&object);
    if !report.is_ok() {
        return Err(ContextError::PayloadInvalid(report.violations));
    }
    Ok(object)
}

/// Builds a full object: validates the payload, normalizes reals and
/// stamps provenance.
pub fn make_object(
    schema: Schema,
    mut payload: Value,
    origin: &Origin,
    parents: Vec<String>,
) -> Result<ContextObject, ContextError> {
    registry::normalize_reals(registry::fields_of(schema), &mut payload);
    let mut violations: Vec<Violation> = Vec::new();
    validate_payload_into(
        schema.as_str(),
        SCHEMA_VERSION,
        &payload,
        false,
        &mut violations,
    );
    if !violations.is_empty() {
        return Err(ContextError::PayloadInvalid(violations));
    }
    let content_hash = compute_hash(&hashed_region(schema, SCHEMA_VERSION, &payload, None));
    Ok(ContextObject::from_parts(
        schema,
        payload,
        Provenance {
            source_node_id: origin.source_node_id.clone(),
            run_id: origin.run_id.clone(),
            created_at_us: origin.created_at_us,
            content_hash,
            parent_hashes: parents,
        },
        None,
    ))
}

/// Typed convenience over [`make_object`].
pub fn make_typed<T: Payload>(
    payload: &T,
    origin: &Origin,
    parents: Vec<String>,
) -> Result<ContextObject, ContextError> {
    make_object(T::SCHEMA, payload.to_value(), origin, parents)
}
