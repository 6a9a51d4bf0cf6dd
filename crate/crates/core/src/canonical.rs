//! Canonical JSON: compact, object keys sorted bytewise at every depth.
//! Used for replay-equivalence hashing, so it must not depend on how
//! `serde_json` happens to order maps.

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

pub fn to_canonical_json<T: Serialize + ?Sized>(value: &T) -> String {
    let value = serde_json::to_value(value).expect("game values always serialize");
    let mut out = String::new();
    write_value(&value, &mut out);
    out
}

/// Lowercase hex SHA-256 of the canonical JSON encoding.
pub fn canonical_hash<T: Serialize + ?Sized>(value: &T) -> String {
    hex::encode(Sha256::digest(to_canonical_json(value).as_bytes()))
}

fn write_value(value: &Value, out: &mut String) {
    match value {
        Value::Object(map) => {
            let mut entries: Vec<(&String, &Value)> = map.iter().collect();
            entries.sort_by(|a, b| a.0.as_bytes().cmp(b.0.as_bytes()));
            out.push('{');
            for (i, (key, val)) in entries.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&Value::String(key.clone()).to_string());
                out.push(':');
                write_value(val, out);
            }
            out.push('}');
        }
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_value(item, out);
            }
            out.push(']');
        }
        leaf => out.push_str(&leaf.to_string()),
    }
}
