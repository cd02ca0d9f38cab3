//! Greedy word-count chunking (no overlap).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{InfoUnit, NodeId, NodeKind};

pub const DEFAULT_MAX_WORDS: usize = 300;
pub const MIN_MAX_WORDS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkingPolicy {
    pub max_words: usize,
    /// Follow the official section hierarchy. When false every document is
    /// cut into flat uniform chunks.
    pub respect_structure: bool,
    /// Split sections longer than `max_words` into child chunks.
    pub split_sections: bool,
}

impl ChunkingPolicy {
    pub fn new(max_words: usize, respect_structure: bool, split_sections: bool) -> Result<Self> {
        if max_words < MIN_MAX_WORDS {
            return Err(Error::Config(format!(
                "max_words must be at least {MIN_MAX_WORDS}, got {max_words}"
            )));
        }
        Ok(ChunkingPolicy {
            max_words,
            respect_structure,
            split_sections,
        })
    }
}

impl Default for ChunkingPolicy {
    fn default() -> Self {
        ChunkingPolicy {
            max_words: DEFAULT_MAX_WORDS,
            respect_structure: true,
            split_sections: true,
        }
    }
}

/// Cuts `text` into consecutive runs of at most `max_words` whitespace
/// separated words, each run joined by single spaces.
pub fn word_chunks(text: &str, max_words: usize) -> Vec<String> {
    let words: Vec<&str> = text.split_whitespace().collect();
    words
        .chunks(max_words.max(1))
        .map(|c| c.join(" "))
        .collect()
}

fn chunk_units(parent: &InfoUnit, pieces: Vec<String>) -> Vec<InfoUnit> {
    let n = pieces.len();
    pieces
        .into_iter()
        .enumerate()
        .map(|(k, body)| InfoUnit {
            id: NodeId::chunk(&parent.id, k + 1),
            doc_id: parent.doc_id.clone(),
            section_code: parent.section_code.clone(),
            title: format!("{} ({}/{})", parent.title, k + 1, n),
            body,
            kind: NodeKind::Chunk,
            is_tabular: false,
        })
        .collect()
}

/// Chunks for an oversized, non-tabular section; empty when no split is
/// needed. The caller parents the chunks to `unit` and clears its body.
pub fn split_oversized(unit: &InfoUnit, policy: &ChunkingPolicy) -> Vec<InfoUnit> {
    if unit.kind != NodeKind::Section || unit.is_tabular {
        return Vec::new();
    }
    if unit.body.split_whitespace().count() <= policy.max_words {
        return Vec::new();
    }
    chunk_units(unit, word_chunks(&unit.body, policy.max_words))
}

/// Flat chunks of a whole document's text, ignoring its structure.
pub fn uniform_chunks(doc: &InfoUnit, text: &str, max_words: usize) -> Vec<InfoUnit> {
    chunk_units(doc, word_chunks(text, max_words))
}
