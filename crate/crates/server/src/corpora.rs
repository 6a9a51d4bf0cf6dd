//! The corpora a server can open rooms with, keyed by file stem.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::Path;
use std::sync::Arc;

use miboard_core::TextCorpus;

/// Used when no corpus directory is configured.
pub const BUILTIN_CORPUS: &str = include_str!("../../../corpora/heart.json");
pub const BUILTIN_ID: &str = "heart";

#[derive(Debug, Clone)]
pub struct Corpora {
    by_id: BTreeMap<String, Arc<TextCorpus>>,
}

impl Corpora {
    pub fn builtin() -> Self {
        let corpus = TextCorpus::from_slice(BUILTIN_CORPUS.as_bytes()).expect("builtin corpus is valid");
        let mut by_id = BTreeMap::new();
        by_id.insert(BUILTIN_ID.to_string(), Arc::new(corpus));
        Corpora { by_id }
    }

    /// Loads every `*.json` file in `dir`. Invalid files are skipped with a
    /// warning; an empty result falls back to the builtin corpus.
    pub fn load_dir(dir: &Path) -> io::Result<Self> {
        let mut by_id = BTreeMap::new();
        for entry in fs::read_dir(dir)? {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("json") {
                continue;
            }
            let Some(id) = path.file_stem().and_then(|s| s.to_str()) else {
                continue;
            };
            match TextCorpus::from_slice(&fs::read(&path)?) {
                Ok(c) => {
                    by_id.insert(id.to_string(), Arc::new(c));
                }
                Err(e) => tracing::warn!(path = %path.display(), error = %e, "skipping corpus"),
            }
        }
        if by_id.is_empty() {
            return Ok(Self::builtin());
        }
        Ok(Corpora { by_id })
    }

    pub fn with(mut self, id: impl Into<String>, corpus: Arc<TextCorpus>) -> Self {
        self.by_id.insert(id.into(), corpus);
        self
    }

    pub fn get(&self, id: &str) -> Option<Arc<TextCorpus>> {
        self.by_id.get(id).cloned()
    }

    /// The first corpus by id.
    pub fn default_corpus(&self) -> Arc<TextCorpus> {
        self.by_id.values().next().cloned().expect("at least one corpus")
    }

    pub fn by_checksum(&self, checksum: &str) -> Option<Arc<TextCorpus>> {
        self.by_id.values().find(|c| c.checksum() == checksum).cloned()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.by_id.keys().map(String::as_str)
    }
}
