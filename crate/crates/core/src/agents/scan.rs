//! Locating JSON values embedded in free text.

use serde_json::Value;

/// Every top-level JSON object or array embedded in `text`, left to right.
/// Each value is taken greedily at the first opening bracket that starts a
/// complete value; scanning resumes after it.
pub fn embedded_json(text: &str) -> Vec<Value> {
    let mut out = Vec::new();
    let mut i = 0;
    let bytes = text.as_bytes();
    while i < bytes.len() {
        if bytes[i] == b'{' || bytes[i] == b'[' {
            let mut stream = serde_json::Deserializer::from_str(&text[i..]).into_iter::<Value>();
            if let Some(Ok(v)) = stream.next() {
                let consumed = stream.byte_offset();
                out.push(v);
                i += consumed.max(1);
                continue;
            }
        }
        i += 1;
    }
    out
}

/// The first balanced JSON object in `text`.
pub fn first_object(text: &str) -> Option<serde_json::Map<String, Value>> {
    let bytes = text.as_bytes();
    for (i, b) in bytes.iter().enumerate() {
        if *b == b'{' {
            let mut stream = serde_json::Deserializer::from_str(&text[i..]).into_iter::<Value>();
            if let Some(Ok(Value::Object(m))) = stream.next() {
                return Some(m);
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn finds_objects_and_arrays_in_prose() {
        let v = embedded_json(r#"step {"a": 1} then [1, {"b": 2}] and {broken"#);
        assert_eq!(v, [json!({"a": 1}), json!([1, {"b": 2}])]);
    }

    #[test]
    fn first_object_skips_braces_in_prose() {
        let o = first_object(r#"Sure {not json} here: {"status":"found"} ok"#).unwrap();
        assert_eq!(o["status"], "found");
        assert!(first_object("nothing here").is_none());
    }
}
