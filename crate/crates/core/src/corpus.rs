//! Reading texts. A corpus is an ordered list of sentences; sentences flagged
//! as targets are the per-round prompts, in ascending sentence order.
//!
//! File format (UTF-8 JSON):
//!
//! ```json
//! {"title": "Photosynthesis", "sentences": [{"text": "...", "target": false}, ...]}
//! ```
//!
//! Indices are implied by array order. An optional `index` field per sentence
//! is accepted and must match the sentence's position.

use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canonical::canonical_hash;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub index: usize,
    pub text: String,
    pub is_target: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TextCorpus {
    title: String,
    sentences: Vec<Sentence>,
    targets: Vec<usize>,
    checksum: String,
}

/// A target sentence plus everything that precedes it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TargetView<'a> {
    pub sentence: &'a Sentence,
    pub context: &'a [Sentence],
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CorpusError {
    #[error("parse error at line {line}, column {column}: {message}")]
    ParseError {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("no sentence is marked as a target")]
    NoTargetSentences,
    #[error("sentences[{index}].text is empty")]
    EmptySentence { index: usize },
    #[error("sentences[{position}].index: index {index} appears twice")]
    DuplicateIndex { position: usize, index: usize },
    #[error("sentences[{position}].index: expected {position}, found {index}")]
    IndexOutOfOrder { position: usize, index: usize },
}

impl CorpusError {
    pub fn code(&self) -> &'static str {
        match self {
            CorpusError::ParseError { .. } => "ParseError",
            CorpusError::NoTargetSentences => "NoTargetSentences",
            CorpusError::EmptySentence { .. } => "EmptySentence",
            CorpusError::DuplicateIndex { .. } => "DuplicateIndex",
            CorpusError::IndexOutOfOrder { .. } => "IndexOutOfOrder",
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CorpusFile {
    title: String,
    sentences: Vec<SentenceFile>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SentenceFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    index: Option<usize>,
    text: String,
    target: bool,
}

pub fn load_corpus<R: Read>(mut source: R) -> Result<TextCorpus, CorpusError> {
    let mut bytes = Vec::new();
    source
        .read_to_end(&mut bytes)
        .map_err(|e| CorpusError::ParseError {
            line: 0,
            column: 0,
            message: e.to_string(),
        })?;
    TextCorpus::from_slice(&bytes)
}

impl TextCorpus {
    pub fn from_slice(bytes: &[u8]) -> Result<Self, CorpusError> {
        let file: CorpusFile =
            serde_json::from_slice(bytes).map_err(|e| CorpusError::ParseError {
                line: e.line(),
                column: e.column(),
                message: e.to_string(),
            })?;
        let mut seen = std::collections::HashSet::new();
        for (position, s) in file.sentences.iter().enumerate() {
            if let Some(index) = s.index {
                if !seen.insert(index) {
                    return Err(CorpusError::DuplicateIndex { position, index });
                }
                if index != position {
                    return Err(CorpusError::IndexOutOfOrder { position, index });
                }
            }
        }
        let sentences = file
            .sentences
            .into_iter()
            .enumerate()
            .map(|(index, s)| Sentence {
                index,
                text: s.text,
                is_target: s.target,
            })
            .collect();
        Self::new(file.title, sentences)
    }

    /// Builds a corpus from already-indexed sentences, validating it.
    pub fn new(title: impl Into<String>, sentences: Vec<Sentence>) -> Result<Self, CorpusError> {
        for (position, s) in sentences.iter().enumerate() {
            if s.index != position {
                return Err(CorpusError::IndexOutOfOrder {
                    position,
                    index: s.index,
                });
            }
            if s.text.trim().is_empty() {
                return Err(CorpusError::EmptySentence { index: position });
            }
        }
        let targets: Vec<usize> = sentences
            .iter()
            .filter(|s| s.is_target)
            .map(|s| s.index)
            .collect();
        if targets.is_empty() {
            return Err(CorpusError::NoTargetSentences);
        }
        let mut corpus = TextCorpus {
            title: title.into(),
            sentences,
            targets,
            checksum: String::new(),
        };
        corpus.checksum = canonical_hash(&corpus.to_file());
        Ok(corpus)
    }

    pub fn title(&self) -> &str {
        &self.title
    }

    pub fn sentences(&self) -> &[Sentence] {
        &self.sentences
    }

    /// SHA-256 (hex) of the canonical JSON encoding of the content.
    pub fn checksum(&self) -> &str {
        &self.checksum
    }

    pub fn target_count(&self) -> usize {
        self.targets.len()
    }

    pub fn target_cursor(&self, position: usize) -> Option<TargetView<'_>> {
        let index = *self.targets.get(position)?;
        Some(TargetView {
            sentence: &self.sentences[index],
            context: &self.sentences[..index],
        })
    }

    pub fn targets(&self) -> impl Iterator<Item = TargetView<'_>> + '_ {
        (0..self.targets.len()).filter_map(move |p| self.target_cursor(p))
    }

    fn to_file(&self) -> CorpusFile {
        CorpusFile {
            title: self.title.clone(),
            sentences: self
                .sentences
                .iter()
                .map(|s| SentenceFile {
                    index: None,
                    text: s.text.clone(),
                    target: s.is_target,
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("corpus serializes")
    }
}
