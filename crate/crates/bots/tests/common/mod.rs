#![allow(dead_code)]

use std::sync::Arc;

use miboard_core::TextCorpus;

/// A corpus with `targets` target sentences, each after a plain one.
pub fn corpus(targets: usize) -> Arc<TextCorpus> {
    let mut sentences = Vec::new();
    for i in 0..targets {
        sentences.push(serde_json::json!({"text": format!("Background sentence {i}."), "target": false}));
        sentences.push(serde_json::json!({"text": format!("Target sentence {i}."), "target": true}));
    }
    let json = serde_json::json!({"title": format!("{targets} targets"), "sentences": sentences});
    Arc::new(TextCorpus::from_slice(json.to_string().as_bytes()).unwrap())
}
