//! The bundled schema registry document (`telemcp-schemas-1.0`) and the
//! structural checks derived from it.

use serde::Deserialize;
use serde_json::Value;
use std::sync::LazyLock;

use super::schema::Schema;
use super::validate::{Violation, ViolationKind};

pub const REGISTRY_ID: &str = "telemcp-schemas-1.0";
pub const REGISTRY_DOCUMENT: &str = include_str!("../../assets/telemcp-schemas-1.0.json");

#[derive(Debug, Clone, Deserialize)]
pub struct RegistryDocument {
    pub registry: String,
    pub schemas: Vec<SchemaDef>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct SchemaDef {
    pub id: String,
    pub version: String,
    pub fields: Vec<FieldDef>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct FieldDef {
    pub name: String,
    #[serde(flatten)]
    pub ty: FieldType,
    #[serde(default)]
    pub optional: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FieldType {
    String,
    /// Non-empty, no whitespace.
    Token,
    /// Non-empty free text.
    Nonempty,
    Int,
    Uint,
    Posint,
    /// Finite real.
    Real,
    /// Real in [0, 1].
    UnitReal,
    Bool,
    Enum {
        values: Vec<String>,
    },
    Object {
        fields: Vec<FieldDef>,
    },
    List {
        items: Box<FieldType>,
    },
    /// Object shaped like another registered schema's payload.
    Ref {
        schema: String,
    },
}

static REGISTRY: LazyLock<RegistryDocument> = LazyLock::new(|| {
    let doc: RegistryDocument =
        serde_json::from_str(REGISTRY_DOCUMENT).expect("bundled schema registry parses");
    assert_eq!(doc.registry, REGISTRY_ID);
    doc
});

pub fn registry() -> &'static RegistryDocument {
    &REGISTRY
}

pub fn lookup(schema: &str, version: &str) -> Option<&'static SchemaDef> {
    REGISTRY
        .schemas
        .iter()
        .find(|s| s.id == schema && s.version == version)
}

pub fn fields_of(schema: Schema) -> &'static [FieldDef] {
    &lookup(schema.as_str(), super::SCHEMA_VERSION)
        .expect("every Schema variant is registered")
        .fields
}

/// Field list an object-like type resolves to, if any.
pub fn object_fields(ty: &FieldType) -> Option<&[FieldDef]> {
    match ty {
        FieldType::Object { fields } => Some(fields),
        FieldType::Ref { schema } => lookup(schema, super::SCHEMA_VERSION).map(|s| &s.fields[..]),
        _ => None,
    }
}

/// Walks a dot-separated path through the field tree. List fields are
/// transparent: `records.name` addresses `name` inside each record.
pub fn resolve_path<'a>(fields: &'a [FieldDef], path: &str) -> Option<&'a FieldDef> {
    let mut current = fields;
    let mut found = None;
    for segment in path.split('.') {
        let field = current.iter().find(|f| f.name == segment)?;
        found = Some(field);
        let mut ty = &field.ty;
        while let FieldType::List { items } = ty {
            ty = items;
        }
        current = object_fields(ty).unwrap_or(&[]);
    }
    found
}

/// Every addressable path, depth-first.
pub fn all_paths(fields: &[FieldDef]) -> Vec<String> {
    fn walk(fields: &[FieldDef], prefix: &str, out: &mut Vec<String>) {
        for f in fields {
            let path = if prefix.is_empty() {
                f.name.clone()
            } else {
                format!("{prefix}.{}", f.name)
            };
            out.push(path.clone());
            let mut ty = &f.ty;
            while let FieldType::List { items } = ty {
                ty = items;
            }
            if let Some(sub) = object_fields(ty) {
                walk(sub, &path, out);
            }
        }
    }
    let mut out = Vec::new();
    walk(fields, "", &mut out);
    out
}

/// Structural check of `value` against `fields`. With `partial` set, absent
/// fields are tolerated (projected payloads).
pub fn check_fields(
    fields: &[FieldDef],
    value: &Value,
    path: &str,
    partial: bool,
    out: &mut Vec<Violation>,
) {
    let Some(map) = value.as_object() else {
        out.push(Violation::new(
            path_or_root(path),
            ViolationKind::WrongType,
            "expected an object".to_string(),
        ));
        return;
    };
    for f in fields {
        let fpath = join(path, &f.name);
        match map.get(&f.name) {
            None if f.optional || partial => {}
            None => out.push(Violation::new(
                fpath.clone(),
                ViolationKind::MissingField,
                format!("missing field {fpath}"),
            )),
            Some(v) => check_type(&f.ty, v, &fpath, partial, out),
        }
    }
    for key in map.keys() {
        if !fields.iter().any(|f| &f.name == key) {
            let kpath = join(path, key);
            out.push(Violation::new(
                kpath.clone(),
                ViolationKind::ExtraField,
                format!("unexpected field {kpath}"),
            ));
        }
    }
}

fn check_type(ty: &FieldType, v: &Value, path: &str, partial: bool, out: &mut Vec<Violation>) {
    let wrong = |out: &mut Vec<Violation>, what: &str| {
        out.push(Violation::new(
            path.to_string(),
            ViolationKind::WrongType,
            format!("{path} must be {what}"),
        ))
    };
    match ty {
        FieldType::String => {
            if !v.is_string() {
                wrong(out, "a string");
            }
        }
        FieldType::Token => match v.as_str() {
            None => wrong(out, "a string"),
            Some("") => out.push(Violation::new(
                path.to_string(),
                ViolationKind::InvariantBreach,
                format!("{path} must be non-empty"),
            )),
            Some(s) if s.chars().any(char::is_whitespace) => out.push(Violation::new(
                path.to_string(),
                ViolationKind::InvariantBreach,
                format!("{path} must not contain whitespace"),
            )),
            Some(_) => {}
        },
        FieldType::Nonempty => match v.as_str() {
            None => wrong(out, "a string"),
            Some(s) if s.trim().is_empty() => out.push(Violation::new(
                path.to_string(),
                ViolationKind::InvariantBreach,
                format!("{path} must be non-empty"),
            )),
            Some(_) => {}
        },
        FieldType::Int => {
            if !(v.is_i64() || v.is_u64()) {
                wrong(out, "an integer");
            }
        }
        FieldType::Uint => {
            if !v.is_u64() {
                if v.is_i64() {
                    out.push(Violation::new(
                        path.to_string(),
                        ViolationKind::RangeViolation,
                        format!("{path} must be non-negative"),
                    ));
                } else {
                    wrong(out, "a non-negative integer");
                }
            }
        }
        FieldType::Posint => match v.as_u64() {
            Some(0) => out.push(Violation::new(
                path.to_string(),
                ViolationKind::RangeViolation,
                format!("{path} must be positive"),
            )),
            Some(_) => {}
            None if v.is_i64() => out.push(Violation::new(
                path.to_string(),
                ViolationKind::RangeViolation,
                format!("{path} must be positive"),
            )),
            None => wrong(out, "a positive integer"),
        },
        FieldType::Real => match v.as_f64() {
            Some(x) if x.is_finite() => {}
            Some(_) => out.push(Violation::new(
                path.to_string(),
                ViolationKind::RangeViolation,
                format!("{path} must be finite"),
            )),
            None => wrong(out, "a number"),
        },
        FieldType::UnitReal => match v.as_f64() {
            Some(x) if (0.0..=1.0).contains(&x) => {}
            Some(_) => {
                let name = path.rsplit('.').next().unwrap_or(path);
                out.push(Violation::new(
                    path.to_string(),
                    ViolationKind::RangeViolation,
                    format!("{name} out of [0,1]"),
                ))
            }
            None => wrong(out, "a number"),
        },
        FieldType::Bool => {
            if !v.is_boolean() {
                wrong(out, "a boolean");
            }
        }
        FieldType::Enum { values } => match v.as_str() {
            Some(s) if values.iter().any(|x| x == s) => {}
            Some(s) => out.push(Violation::new(
                path.to_string(),
                ViolationKind::RangeViolation,
                format!("{path} value {s:?} not one of {}", values.join("|")),
            )),
            None => wrong(out, "a string"),
        },
        FieldType::Object { fields } => check_fields(fields, v, path, partial, out),
        FieldType::Ref { schema } => match lookup(schema, super::SCHEMA_VERSION) {
            Some(def) => check_fields(&def.fields, v, path, partial, out),
            None => out.push(Violation::new(
                path.to_string(),
                ViolationKind::UnknownSchema,
                format!("{path} refers to unknown schema {schema}"),
            )),
        },
        FieldType::List { items } => match v.as_array() {
            Some(arr) => {
                for (i, item) in arr.iter().enumerate() {
                    check_type(items, item, &format!("{path}[{i}]"), partial, out);
                }
            }
            None => wrong(out, "a list"),
        },
    }
}

/// Rewrites integer literals in real-typed fields as floats so that
/// `{"confidence":1}` and `{"confidence":1.0}` share one canonical form.
pub fn normalize_reals(fields: &[FieldDef], value: &mut Value) {
    let Some(map) = value.as_object_mut() else {
        return;
    };
    for f in fields {
        if let Some(v) = map.get_mut(&f.name) {
            normalize_type(&f.ty, v);
        }
    }
}

fn normalize_type(ty: &FieldType, v: &mut Value) {
    match ty {
        FieldType::Real | FieldType::UnitReal => {
            if v.is_i64() || v.is_u64() {
                if let Some(x) = v.as_f64().and_then(serde_json::Number::from_f64) {
                    *v = Value::Number(x);
                }
            }
        }
        FieldType::Object { .. } | FieldType::Ref { .. } => {
            if let Some(fields) = object_fields(ty) {
                normalize_reals(fields, v);
            }
        }
        FieldType::List { items } => {
            if let Some(arr) = v.as_array_mut() {
                for item in arr {
                    normalize_type(items, item);
                }
            }
        }
        _ => {}
    }
}

fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

fn path_or_root(path: &str) -> String {
    if path.is_empty() {
        "payload".to_string()
    } else {
        path.to_string()
    }
}
