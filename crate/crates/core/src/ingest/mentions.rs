//! Citation mentions: extraction from unit bodies and resolution to at most
//! one referent unit.
//!
//! Three mention shapes are recognised:
//! - section only (`clause 5.2`), resolved inside the citing document;
//! - document only (`as per XS 100-1`), resolved to that document's node;
//! - combined (`XS 100-1, clause 7.2` or `clause 7.2 of XS 100-1`), resolved
//!   to the named section of the named document.

use std::collections::HashMap;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::ingest::manifest::{normalize_name, CorpusManifest};
use crate::model::{GraphBuilder, InfoUnit, NodeId, NodeKind};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MentionGrammar {
    /// Words introducing a section reference, matched case-insensitively.
    pub keywords: Vec<String>,
    /// Maximum characters between a document name and a section reference
    /// for the two to form one combined mention.
    pub window: usize,
}

impl Default for MentionGrammar {
    fn default() -> Self {
        MentionGrammar {
            keywords: vec!["clause".into(), "section".into(), "annex".into()],
            window: 80,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mention {
    pub raw: String,
    pub doc_part: Option<String>,
    pub section_part: Option<String>,
    pub source: NodeId,
}

#[derive(Debug, Clone, Copy)]
struct Span {
    start: usize,
    end: usize,
}

pub struct MentionExtractor {
    names: Option<Regex>,
    sections: Regex,
    joiner: Regex,
    window: usize,
}

impl MentionExtractor {
    pub fn new(manifest: &CorpusManifest, grammar: &MentionGrammar) -> Self {
        let mut names: Vec<String> = manifest
            .documents
            .iter()
            .flat_map(|d| d.names())
            .map(normalize_name)
            .filter(|n| !n.is_empty())
            .collect();
        names.sort_by(|a, b| b.len().cmp(&a.len()).then(a.cmp(b)));
        names.dedup();
        let alternation = names
            .iter()
            .map(|n| {
                n.split(' ')
                    .map(regex::escape)
                    .collect::<Vec<_>>()
                    .join(r"\s+")
            })
            .collect::<Vec<_>>()
            .join("|");
        let names = (!alternation.is_empty())
            .then(|| Regex::new(&format!("(?i)(?:{alternation})")).expect("escaped names"));

        let keywords = grammar
            .keywords
            .iter()
            .map(|k| regex::escape(k))
            .collect::<Vec<_>>()
            .join("|");
        let sections = Regex::new(&format!(
            r"\b(?i:{keywords})s?\s+(?P<code>[A-Z]?[0-9]+(?:\.[0-9]+)*|[A-Z](?:\.[0-9]+)*)\b"
        ))
        .expect("escaped keywords");
        let joiner = Regex::new(r"(?i)^\s*,?\s*(?:of|in)\s+(?:the\s+)?$").unwrap();

        MentionExtractor {
            names,
            sections,
            joiner,
            window: grammar.window,
        }
    }

    fn doc_spans(&self, text: &str) -> Vec<Span> {
        let Some(re) = &self.names else {
            return Vec::new();
        };
        let alnum_at = |i: Option<char>| i.is_some_and(char::is_alphanumeric);
        re.find_iter(text)
            .filter(|m| {
                !alnum_at(text[..m.start()].chars().next_back())
                    && !alnum_at(text[m.end()..].chars().next())
            })
            .map(|m| Span {
                start: m.start(),
                end: m.end(),
            })
            .collect()
    }

    pub fn extract(&self, unit: &InfoUnit) -> Vec<Mention> {
        let text = &unit.body;
        let docs = self.doc_spans(text);
        let secs: Vec<(Span, String)> = self
            .sections
            .captures_iter(text)
            .map(|c| {
                let m = c.get(0).unwrap();
                (
                    Span {
                        start: m.start(),
                        end: m.end(),
                    },
                    c["code"].to_string(),
                )
            })
            .collect();

        let mut doc_used = vec![false; docs.len()];
        let mut sec_doc: Vec<Option<usize>> = vec![None; secs.len()];

        // "clause X of DOC"
        for (si, (s, _)) in secs.iter().enumerate() {
            if let Some(di) = docs.iter().position(|d| d.start >= s.end) {
                let gap = &text[s.end..docs[di].start];
                if !doc_used[di] && gap.len() <= self.window && self.joiner.is_match(gap) {
                    doc_used[di] = true;
                    sec_doc[si] = Some(di);
                }
            }
        }
        // "DOC, clause X"
        for (di, d) in docs.iter().enumerate() {
            if doc_used[di] {
                continue;
            }
            let next_doc_start = docs.get(di + 1).map_or(usize::MAX, |n| n.start);
            let candidate = secs
                .iter()
                .enumerate()
                .find(|(si, (s, _))| sec_doc[*si].is_none() && s.start >= d.end);
            if let Some((si, (s, _))) = candidate {
                if s.start - d.end <= self.window && s.start < next_doc_start {
                    doc_used[di] = true;
                    sec_doc[si] = Some(di);
                }
            }
        }

        let mut found: Vec<(usize, Mention)> = Vec::new();
        for (si, (s, code)) in secs.iter().enumerate() {
            let (start, end, doc_part) = match sec_doc[si] {
                Some(di) => {
                    let d = docs[di];
                    (
                        d.start.min(s.start),
                        d.end.max(s.end),
                        Some(normalize_name(&text[d.start..d.end])),
                    )
                }
                None => (s.start, s.end, None),
            };
            found.push((
                start,
                Mention {
                    raw: text[start..end].to_string(),
                    doc_part,
                    section_part: Some(code.clone()),
                    source: unit.id.clone(),
                },
            ));
        }
        for (di, d) in docs.iter().enumerate() {
            if !doc_used[di] {
                found.push((
                    d.start,
                    Mention {
                        raw: text[d.start..d.end].to_string(),
                        doc_part: Some(normalize_name(&text[d.start..d.end])),
                        section_part: None,
                        source: unit.id.clone(),
                    },
                ));
            }
        }
        found.sort_by_key(|(start, _)| *start);
        found.into_iter().map(|(_, m)| m).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Resolution {
    Resolved(NodeId),
    NotFound,
    Ambiguous(Vec<String>),
}

/// Read-only lookup tables over a fully loaded graph.
pub struct Resolver {
    by_name: HashMap<String, Vec<String>>,
    sections: HashMap<(String, String), NodeId>,
    doc_nodes: HashMap<String, NodeId>,
    doc_of: HashMap<NodeId, String>,
    resolve_sections: bool,
}

impl Resolver {
    /// `resolve_sections = false` degrades combined mentions to their
    /// document and leaves section-only mentions unresolvable.
    pub fn new(manifest: &CorpusManifest, graph: &GraphBuilder, resolve_sections: bool) -> Self {
        let mut by_name: HashMap<String, Vec<String>> = HashMap::new();
        for d in &manifest.documents {
            for name in d.names() {
                let owners = by_name.entry(normalize_name(name)).or_default();
                if !owners.contains(&d.doc_id) {
                    owners.push(d.doc_id.clone());
                }
            }
        }
        let mut sections = HashMap::new();
        let mut doc_nodes = HashMap::new();
        let mut doc_of = HashMap::new();
        for u in graph.nodes() {
            doc_of.insert(u.id.clone(), u.doc_id.clone());
            match u.kind {
                NodeKind::Document => {
                    doc_nodes.insert(u.doc_id.clone(), u.id.clone());
                }
                NodeKind::Section => {
                    if let Some(code) = &u.section_code {
                        sections.insert((u.doc_id.clone(), code.clone()), u.id.clone());
                    }
                }
                NodeKind::Chunk => {}
            }
        }
        Resolver {
            by_name,
            sections,
            doc_nodes,
            doc_of,
            resolve_sections,
        }
    }

    fn document(&self, name: &str) -> std::result::Result<&str, Resolution> {
        match self.by_name.get(&normalize_name(name)).map(Vec::as_slice) {
            Some([one]) if self.doc_nodes.contains_key(one) => Ok(one),
            Some(many) if many.len() > 1 => Err(Resolution::Ambiguous(many.to_vec())),
            _ => Err(Resolution::NotFound),
        }
    }

    pub fn resolve(&self, mention: &Mention) -> Resolution {
        let doc = match &mention.doc_part {
            Some(name) => match self.document(name) {
                Ok(d) => d,
                Err(r) => return r,
            },
            None => match self.doc_of.get(&mention.source) {
                Some(d) => d.as_str(),
                None => return Resolution::NotFound,
            },
        };
        match &mention.section_part {
            None => Resolution::Resolved(self.doc_nodes[doc].clone()),
            Some(_) if !self.resolve_sections => match &mention.doc_part {
                Some(_) => Resolution::Resolved(self.doc_nodes[doc].clone()),
                None => Resolution::NotFound,
            },
            Some(code) => self
                .sections
                .get(&(doc.to_string(), code.clone()))
                .cloned()
                .map_or(Resolution::NotFound, Resolution::Resolved),
        }
    }
}

/// Resolve a mention against a graph, or `None` when nothing (or more than
/// one document) matches.
pub fn resolve_mention(resolver: &Resolver, mention: &Mention) -> Option<NodeId> {
    match resolver.resolve(mention) {
        Resolution::Resolved(id) => Some(id),
        Resolution::Ambiguous(candidates) => {
            log::warn!(
                "{}: mention {:?} matches several documents {:?}",
                mention.source,
                mention.raw,
                candidates
            );
            None
        }
        Resolution::NotFound => None,
    }
}
