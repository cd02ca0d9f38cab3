//! Okapi BM25 inverted index used as the candidate prefilter.
//!
//! ```text
//! score(q, d) = Σ_t IDF(t) · tf·(k1 + 1) / (tf + k1·(1 − b + b·|d|/avgdl))
//! IDF(t)      = ln((N − df + 0.5) / (df + 0.5) + 1)
//! ```
//!
//! The `+ 1` inside the logarithm keeps IDF positive even for terms that
//! occur in every node, which is common in small corpora.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::InfoGraph;
use crate::retrieval::{Provenance, RankedList, ScoredNode};
use crate::tokenize::{Tokenizer, TokenizerOptions};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
    #[serde(default)]
    pub tokenizer: TokenizerOptions,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params {
            k1: 1.5,
            b: 0.75,
            tokenizer: TokenizerOptions::default(),
        }
    }
}

impl Bm25Params {
    pub fn check(&self) -> Result<()> {
        if !(self.k1.is_finite() && self.k1 >= 0.0) {
            return Err(Error::Config(format!("k1 must be >= 0, got {}", self.k1)));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(Error::Config(format!(
                "b must be in [0, 1], got {}",
                self.b
            )));
        }
        Ok(())
    }
}

pub fn idf(node_count: usize, df: usize) -> f64 {
    let (n, df) = (node_count as f64, df as f64);
    ((n - df + 0.5) / (df + 0.5) + 1.0).ln()
}

/// On-disk form (`bm25.json`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseFile {
    pub params: Bm25Params,
    pub avg_doc_length: f64,
    pub doc_lengths: Vec<u32>,
    pub postings: BTreeMap<String, Vec<(u32, u32)>>,
}

#[derive(Clone)]
pub struct SparseIndex {
    params: Bm25Params,
    tokenizer: Tokenizer,
    // term -> (node ordinal, term frequency), sorted by ordinal
    postings: HashMap<String, Vec<(u32, u32)>>,
    doc_lengths: Vec<u32>,
    avg_doc_length: f64,
}

impl SparseIndex {
    /// Indexes `title + "\n" + body` of every node.
    pub fn build(graph: &InfoGraph, params: Bm25Params) -> Result<Self> {
        params.check()?;
        let texts: Vec<String> = graph.nodes().iter().map(|u| u.text()).collect();
        Ok(Self::from_texts(texts.iter().map(String::as_str), params))
    }

    pub fn from_texts<'a>(texts: impl IntoIterator<Item = &'a str>, params: Bm25Params) -> Self {
        let tokenizer = Tokenizer::new(params.tokenizer);
        let mut postings: HashMap<String, Vec<(u32, u32)>> = HashMap::new();
        let mut doc_lengths = Vec::new();
        for (ordinal, text) in texts.into_iter().enumerate() {
            let tokens = tokenizer.tokenize(text);
            doc_lengths.push(tokens.len() as u32);
            let mut tf: BTreeMap<String, u32> = BTreeMap::new();
            for t in tokens {
                *tf.entry(t).or_default() += 1;
            }
            for (term, count) in tf {
                postings
                    .entry(term)
                    .or_default()
                    .push((ordinal as u32, count));
            }
        }
        let avg_doc_length = if doc_lengths.is_empty() {
            0.0
        } else {
            doc_lengths.iter().map(|&l| f64::from(l)).sum::<f64>() / doc_lengths.len() as f64
        };
        SparseIndex {
            params,
            tokenizer,
            postings,
            doc_lengths,
            avg_doc_length,
        }
    }

    pub fn from_file(file: SparseFile) -> Result<Self> {
        file.params.check()?;
        let n = file.doc_lengths.len() as u32;
        for (term, list) in &file.postings {
            let sorted = list.windows(2).all(|w| w[0].0 < w[1].0);
            if list.is_empty() || !sorted || list.iter().any(|&(o, tf)| o >= n || tf == 0) {
                return Err(Error::Inconsistent(format!(
                    "bad postings for term {term:?}"
                )));
            }
        }
        Ok(SparseIndex {
            tokenizer: Tokenizer::new(file.params.tokenizer),
            params: file.params,
            postings: file.postings.into_iter().collect(),
            doc_lengths: file.doc_lengths,
            avg_doc_length: file.avg_doc_length,
        })
    }

    pub fn to_file(&self) -> SparseFile {
        SparseFile {
            params: self.params,
            avg_doc_length: self.avg_doc_length,
            doc_lengths: self.doc_lengths.clone(),
            postings: self
                .postings
                .iter()
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        }
    }

    pub fn params(&self) -> &Bm25Params {
        &self.params
    }

    pub fn node_count(&self) -> usize {
        self.doc_lengths.len()
    }

    pub fn doc_length(&self, ordinal: usize) -> u32 {
        self.doc_lengths[ordinal]
    }

    pub fn avg_doc_length(&self) -> f64 {
        self.avg_doc_length
    }

    pub fn postings(&self, term: &str) -> &[(u32, u32)] {
        self.postings.get(term).map_or(&[], Vec::as_slice)
    }

    pub fn tokenize(&self, text: &str) -> Vec<String> {
        self.tokenizer.tokenize(text)
    }

    fn term_weight(&self, tf: u32, ordinal: usize) -> f64 {
        let Bm25Params { k1, b, .. } = self.params;
        let tf = f64::from(tf);
        let len_ratio = if self.avg_doc_length > 0.0 {
            f64::from(self.doc_lengths[ordinal]) / self.avg_doc_length
        } else {
            0.0
        };
        tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * len_ratio))
    }

    /// BM25 score of one node for already tokenized query terms. Repeated
    /// query terms count once per occurrence.
    pub fn score(&self, query_terms: &[String], ordinal: usize) -> f64 {
        let n = self.node_count();
        query_terms
            .iter()
            .filter_map(|t| {
                let list = self.postings.get(t)?;
                let pos = list
                    .binary_search_by_key(&(ordinal as u32), |&(o, _)| o)
                    .ok()?;
                Some(idf(n, list.len()) * self.term_weight(list[pos].1, ordinal))
            })
            .sum()
    }

    /// Top-`n` nodes with at least one matching posting, by score
    /// descending, ties by canonical order.
    pub fn prefilter(&self, query_text: &str, n: usize) -> RankedList {
        let terms = self.tokenize(query_text);
        let node_count = self.node_count();
        let mut scores = vec![0.0f64; node_count];
        let mut hit = vec![false; node_count];
        for t in &terms {
            let Some(list) = self.postings.get(t) else {
                continue;
            };
            let w = idf(node_count, list.len());
            for &(o, tf) in list {
                let o = o as usize;
                scores[o] += w * self.term_weight(tf, o);
                hit[o] = true;
            }
        }
        let mut entries: Vec<ScoredNode> = (0..node_count)
            .filter(|&o| hit[o])
            .map(|o| ScoredNode {
                node: o,
                score: scores[o],
            })
            .collect();
        entries.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.node.cmp(&b.node)));
        entries.truncate(n);
        RankedList::new(entries, Provenance::Sparse)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn terms(s: &str) -> Vec<String> {
        crate::tokenize::tokenize(s)
    }

    #[test]
    fn counts_and_lengths() {
        let idx = SparseIndex::from_texts(["T\nalpha alpha beta"], Bm25Params::default());
        assert_eq!(idx.postings("alpha"), [(0, 2)]);
        assert_eq!(idx.postings("beta"), [(0, 1)]);
        assert_eq!(idx.doc_length(0), 4);
    }

    #[test]
    fn single_doc_hand_value() {
        let idx = SparseIndex::from_texts(["alpha beta"], Bm25Params::default());
        let s = idx.score(&terms("alpha"), 0);
        assert!((s - (4.0f64 / 3.0).ln()).abs() < 1e-12);
        assert!((s - 0.2877).abs() < 1e-4);
        assert_eq!(idx.score(&terms("gamma"), 0), 0.0);
    }

    #[test]
    fn k1_invariance_at_unit_tf() {
        let texts = ["alpha beta", "beta gamma"];
        let a = SparseIndex::from_texts(texts, Bm25Params::default());
        let b = SparseIndex::from_texts(
            texts,
            Bm25Params {
                k1: 3.0,
                ..Bm25Params::default()
            },
        );
        let q = terms("alpha");
        assert!((a.score(&q, 0) - b.score(&q, 0)).abs() < 1e-12);
    }

    #[test]
    fn idf_positive_for_ubiquitous_terms() {
        assert!(idf(3, 3) > 0.0);
        assert!(idf(1, 1) > 0.0);
    }

    #[test]
    fn prefilter_cases() {
        let idx = SparseIndex::from_texts(
            ["radiated emission", "immunity test level", "test setup"],
            Bm25Params::default(),
        );
        assert!(idx.prefilter("nothing matches", 10).is_empty());
        let r = idx.prefilter("immunity test", 10);
        assert_eq!(r.nodes(), vec![1, 2]);
        assert_eq!(idx.prefilter("immunity test", 1).len(), 1);
    }

    #[test]
    fn params_validated() {
        let bad = Bm25Params {
            b: 1.5,
            ..Bm25Params::default()
        };
        assert!(bad.check().is_err());
    }

    #[test]
    fn file_round_trip() {
        let idx = SparseIndex::from_texts(["a b", "b c c"], Bm25Params::default());
        let file = idx.to_file();
        let json = serde_json::to_string(&file).unwrap();
        let back = SparseIndex::from_file(serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back.to_file(), file);
    }
}
