//! Builds an [`InfoGraph`] from a corpus manifest and pre-extracted text.
//!
//! Per document: segment into sections, link parthood by code extension,
//! split oversized sections into child chunks. Once every document is
//! loaded, citation mentions are extracted from unit bodies and resolved
//! against the whole corpus.

pub mod chunking;
pub mod manifest;
pub mod mentions;
pub mod sections;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{GraphBuilder, InfoGraph, InfoUnit, NodeId, NodeKind};

pub use chunking::{split_oversized, uniform_chunks, word_chunks, ChunkingPolicy};
pub use manifest::{CorpusManifest, DocumentEntry, TocEntry};
pub use mentions::{
    resolve_mention, Mention, MentionExtractor, MentionGrammar, Resolution, Resolver,
};
pub use sections::{is_parent_code, is_tabular, link_parthood, parse_sections, SectionCode};

/// Index construction strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Flat uniform chunks per document.
    Vanilla,
    /// Official section hierarchy, sections kept whole.
    Structured,
    /// Official section hierarchy, oversized sections split into chunks.
    StructuredChunks,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Vanilla, Mode::Structured, Mode::StructuredChunks];

    pub fn policy(self, max_words: usize) -> Result<ChunkingPolicy> {
        match self {
            Mode::Vanilla => ChunkingPolicy::new(max_words, false, true),
            Mode::Structured => ChunkingPolicy::new(max_words, true, false),
            Mode::StructuredChunks => ChunkingPolicy::new(max_words, true, true),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Vanilla => "vanilla",
            Mode::Structured => "structured",
            Mode::StructuredChunks => "structured-chunks",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown mode {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentError {
    pub doc_id: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub documents: usize,
    pub nodes: usize,
    pub parthood_edges: usize,
    pub citation_edges: usize,
    pub mentions_extracted: usize,
    pub mentions_resolved: usize,
    pub mentions_unresolved: usize,
    pub self_citations_dropped: usize,
    pub errors: Vec<DocumentError>,
}

struct DocUnits {
    units: Vec<InfoUnit>,
    parthood: Vec<(NodeId, NodeId)>,
}

fn structured_units(
    entry: &DocumentEntry,
    text: &str,
    policy: &ChunkingPolicy,
) -> Result<DocUnits> {
    let sections = parse_sections(entry, text)?;
    let mut parthood = link_parthood(&sections);
    let mut units = Vec::with_capacity(sections.len());
    for mut unit in sections {
        let chunks = if policy.split_sections {
            split_oversized(&unit, policy)
        } else {
            Vec::new()
        };
        if !chunks.is_empty() {
            unit.body.clear();
        }
        let parent = unit.id.clone();
        units.push(unit);
        for c in chunks {
            parthood.push((c.id.clone(), parent.clone()));
            units.push(c);
        }
    }
    Ok(DocUnits { units, parthood })
}

fn vanilla_units(entry: &DocumentEntry, text: &str, policy: &ChunkingPolicy) -> Result<DocUnits> {
    let doc = InfoUnit::document(&entry.doc_id, &entry.title);
    let chunks = uniform_chunks(&doc, text, policy.max_words);
    if chunks.is_empty() {
        return Err(Error::EmptyDocument(entry.doc_id.clone()));
    }
    let parthood = chunks
        .iter()
        .map(|c| (c.id.clone(), doc.id.clone()))
        .collect();
    let mut units = vec![doc];
    units.extend(chunks);
    Ok(DocUnits { units, parthood })
}

/// Parses every document of the manifest and assembles the graph.
///
/// Per-document failures are collected in the report; the build fails only
/// when no document could be ingested.
pub fn build_graph(
    manifest: &CorpusManifest,
    policy: &ChunkingPolicy,
    grammar: &MentionGrammar,
) -> Result<(InfoGraph, IngestReport)> {
    let parsed: Vec<Result<DocUnits>> = manifest
        .documents
        .par_iter()
        .map(|entry| {
            let text = manifest.read_text(entry)?;
            if policy.respect_structure {
                structured_units(entry, &text, policy)
            } else {
                vanilla_units(entry, &text, policy)
            }
        })
        .collect();

    let mut report = IngestReport::default();
    let mut builder = GraphBuilder::new();
    let mut all_parthood = Vec::new();
    for (entry, result) in manifest.documents.iter().zip(parsed) {
        match result {
            Ok(doc) => {
                for unit in doc.units {
                    builder.add_node(unit)?;
                }
                all_parthood.extend(doc.parthood);
                report.documents += 1;
            }
            Err(e) => {
                log::error!("{}: {e}", entry.doc_id);
                report.errors.push(DocumentError {
                    doc_id: entry.doc_id.clone(),
                    message: e.to_string(),
                });
            }
        }
    }
    if report.documents == 0 {
        return Err(Error::NothingIngested(report.errors.len()));
    }
    for (child, parent) in &all_parthood {
        builder.add_parthood(child, parent)?;
    }

    let extractor = MentionExtractor::new(manifest, grammar);
    let mut mentions: Vec<Mention> = builder
        .nodes()
        .par_iter()
        .filter(|u| !u.body.is_empty() && u.kind != NodeKind::Document)
        .flat_map_iter(|u| extractor.extract(u))
        .collect();
    if !policy.respect_structure {
        mentions.retain(|m| m.doc_part.is_some());
    }
    let resolver = Resolver::new(manifest, &builder, policy.respect_structure);
    let targets: Vec<Option<NodeId>> = mentions
        .par_iter()
        .map(|m| resolve_mention(&resolver, m))
        .collect();

    report.mentions_extracted = mentions.len();
    for (m, target) in mentions.iter().zip(targets) {
        match target {
            Some(to) => {
                report.mentions_resolved += 1;
                if to == m.source {
                    report.self_citations_dropped += 1;
                }
                builder.add_citation(&m.source, &to)?;
            }
            None => {
                report.mentions_unresolved += 1;
                builder.record_unresolved(&m.source, &m.raw);
            }
        }
    }

    let graph = builder.freeze()?;
    report.nodes = graph.len();
    report.parthood_edges = graph.parthood_count();
    report.citation_edges = graph.citation_count();
    Ok((graph, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn write_corpus(dir: &std::path::Path, docs: &[(&str, &str, &[&str], &str)]) -> CorpusManifest {
        let mut documents = Vec::new();
        for (id, title, aliases, text) in docs {
            fs::write(dir.join(format!("{id}.txt")), text).unwrap();
            documents.push(DocumentEntry {
                doc_id: id.to_string(),
                title: title.to_string(),
                aliases: aliases.iter().map(|s| s.to_string()).collect(),
                path: format!("{id}.txt").into(),
                toc: None,
            });
        }
        let m = CorpusManifest {
            documents,
            base_dir: dir.to_path_buf(),
        };
        m.check().unwrap();
        m
    }

    fn words(n: usize, tag: &str) -> String {
        (0..n)
            .map(|i| format!("{tag}{i}"))
            .collect::<Vec<_>>()
            .join(" ")
    }

    #[test]
    fn cross_document_citation() {
        let dir = tempfile::tempdir().unwrap();
        let m = write_corpus(
            dir.path(),
            &[
                (
                    "A",
                    "Doc A",
                    &["XS 1"],
                    "1 Scope\nThis follows XS 2 closely.\n",
                ),
                ("B", "Doc B", &["XS 2"], "1 Scope\nNothing here.\n"),
            ],
        );
        let (g, report) =
            build_graph(&m, &ChunkingPolicy::default(), &MentionGrammar::default()).unwrap();
        let from = g.ordinal(&NodeId::section("A", "1")).unwrap();
        let to = g.ordinal(&NodeId::document("B")).unwrap();
        assert_eq!(g.cites(from), [to]);
        assert_eq!(report.mentions_resolved, 1);
        assert!(g.validate().is_empty());
    }

    #[test]
    fn vanilla_mode_flat_chunks() {
        let dir = tempfile::tempdir().unwrap();
        let text = format!("1 Scope\n{}", words(698, "w"));
        let m = write_corpus(dir.path(), &[("A", "Doc A", &[], &text)]);
        let policy = Mode::Vanilla.policy(300).unwrap();
        let (g, _) = build_graph(&m, &policy, &MentionGrammar::default()).unwrap();
        assert_eq!(g.len(), 4);
        assert!(g.nodes().iter().all(|u| u.kind != NodeKind::Section));
        assert_eq!(g.children_ordinals(0).len(), 3);
    }

    #[test]
    fn structured_chunks_split_oversized_section() {
        let dir = tempfile::tempdir().unwrap();
        let text = format!("1 Scope\n{}\n2 Other\nshort body.", words(400, "w"));
        let m = write_corpus(dir.path(), &[("A", "Doc A", &[], &text)]);
        let policy = Mode::StructuredChunks.policy(300).unwrap();
        let (g, _) = build_graph(&m, &policy, &MentionGrammar::default()).unwrap();
        let s1 = g.ordinal(&NodeId::section("A", "1")).unwrap();
        assert_eq!(g.children_ordinals(s1).len(), 2);
        assert!(g.node(s1).body.is_empty());

        let policy = Mode::Structured.policy(300).unwrap();
        let (g, _) = build_graph(&m, &policy, &MentionGrammar::default()).unwrap();
        assert_eq!(g.len(), 3);
    }

    #[test]
    fn failed_documents_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = write_corpus(dir.path(), &[("A", "Doc A", &[], "1 Scope\nok.")]);
        m.documents.push(DocumentEntry {
            doc_id: "B".into(),
            title: "Doc B".into(),
            aliases: vec![],
            path: "missing.txt".into(),
            toc: None,
        });
        let (_, report) =
            build_graph(&m, &ChunkingPolicy::default(), &MentionGrammar::default()).unwrap();
        assert_eq!(report.documents, 1);
        assert_eq!(report.errors.len(), 1);
        m.documents.remove(0);
        assert!(matches!(
            build_graph(&m, &ChunkingPolicy::default(), &MentionGrammar::default()),
            Err(Error::NothingIngested(1))
        ));
    }

    #[test]
    fn mode_names() {
        for m in Mode::ALL {
            assert_eq!(m.as_str().parse::<Mode>().unwrap(), m);
        }
    }
}
