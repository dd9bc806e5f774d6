//! Canonical JSON text profile used for hashing and exchange.
//!
//! Object keys are emitted in bytewise order, no insignificant whitespace,
//! integers in minimal decimal form and reals in shortest round-trip form.
//! Key ordering is done here rather than relying on the map type backing
//! `serde_json::Value`, so enabling `preserve_order` anywhere in the
//! dependency graph cannot change the bytes.

use serde_json::Value;
use sha2::{Digest, Sha256};

/// Serializes `value` into canonical bytes.
pub fn to_canonical_bytes(value: &Value) -> Vec<u8> {
    let mut out = Vec::with_capacity(128);
    write_value(&mut out, value);
    out
}

/// Canonical text form of `value`.
pub fn to_canonical_string(value: &Value) -> String {
    // write_value only ever emits valid UTF-8.
    String::from_utf8(to_canonical_bytes(value)).expect("canonical output is utf-8")
}

/// SHA-256 of `bytes` as 64 lowercase hex characters.
pub fn compute_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// True when `s` looks like a digest produced by [`compute_hash`].
pub fn is_hex_digest(s: &str) -> bool {
    s.len() == 64 && s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'))
}

fn write_value(out: &mut Vec<u8>, value: &Value) {
    match value {
        Value::Null => out.extend_from_slice(b"null"),
        Value::Bool(true) => out.extend_from_slice(b"true"),
        Value::Bool(false) => out.extend_from_slice(b"false"),
        Value::Number(n) => write_number(out, n),
        Value::String(s) => write_string(out, s),
        Value::Array(items) => {
            out.push(b'[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(b',');
                }
                write_value(out, item);
            }
            out.push(b']');
        }
        Value::Object(map) => {
            let mut entries: Vec<(&String, &Value)> = map.iter().collect();
            entries.sort_by(|a, b| a.0.as_bytes().cmp(b.0.as_bytes()));
            out.push(b'{');
            for (i, (k, v)) in entries.into_iter().enumerate() {
                if i > 0 {
                    out.push(b',');
                }
                write_string(out, k);
                out.push(b':');
                write_value(out, v);
            }
            out.push(b'}');
        }
    }
}

fn write_number(out: &mut Vec<u8>, n: &serde_json::Number) {
    if let Some(i) = n.as_i64() {
        out.extend_from_slice(i.to_string().as_bytes());
    } else if let Some(u) = n.as_u64() {
        out.extend_from_slice(u.to_string().as_bytes());
    } else {
        // serde_json formats f64 through ryu: shortest text that round-trips.
        out.extend_from_slice(n.to_string().as_bytes());
    }
}

fn write_string(out: &mut Vec<u8>, s: &str) {
    // serde_json's escaping is minimal and deterministic.
    let quoted = serde_json::to_string(s).expect("string serialization is infallible");
    out.extend_from_slice(quoted.as_bytes());
}
