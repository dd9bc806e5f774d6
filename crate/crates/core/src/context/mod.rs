//! TeleMCP context objects: typed payload schemas, canonical encoding,
//! content hashing, provenance and field-selection projection.

pub mod canonical;
pub mod object;
pub mod payloads;
pub mod project;
pub mod registry;
pub mod schema;
pub mod validate;

pub use canonical::{compute_hash, is_hex_digest, to_canonical_bytes, to_canonical_string};
pub use object::{
    canonicalize, decode, make_object, make_typed, ContextObject, Origin, Provenance,
};
pub use payloads::{
    ApprovalFlag, Direction, ExpectedStep, KpiSample, LogWindow, MessageRecord, Payload,
    ProceduralFlow, RawRef, TextBlob, ValidationVerdict, VerdictStatus,
};
pub use project::{project, project_as, FieldSelector};
pub use schema::Schema;
pub use validate::{validate_object, validate_payload, ValidationReport, Violation, ViolationKind};

pub const SCHEMA_VERSION: &str = "1.0";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ContextError {
    #[error("unregistered schema {0}")]
    UnregisteredSchema(String),
    #[error("payload invalid: {}", .0.iter().map(|v| v.message.as_str()).collect::<Vec<_>>().join("; "))]
    PayloadInvalid(Vec<Violation>),
    #[error("schema mismatch: expected {expected}, found {found}")]
    SchemaMismatch { expected: Schema, found: Schema },
    #[error("unresolvable path {0:?}")]
    UnresolvablePath(String),
    #[error("field selector has no paths")]
    EmptySelector,
    #[error("decode error: {0}")]
    Decode(String),
}
