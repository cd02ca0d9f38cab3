//! Section segmentation and parthood linking.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;
use std::sync::LazyLock;

use regex::Regex;

use crate::error::{Error, Result};
use crate::ingest::manifest::DocumentEntry;
use crate::model::{InfoUnit, NodeId, NodeKind};

/// Dot-separated section code such as `5.2.1` or `A.1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SectionCode {
    segments: Vec<String>,
}

impl SectionCode {
    pub fn segments(&self) -> &[String] {
        &self.segments
    }

    pub fn depth(&self) -> usize {
        self.segments.len()
    }

    fn with_last(&self, upto: usize, last: String) -> SectionCode {
        let mut segments = self.segments[..upto].to_vec();
        segments.push(last);
        SectionCode { segments }
    }
}

impl FromStr for SectionCode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let segments: Vec<String> = s.split('.').map(str::to_string).collect();
        let ok = segments
            .iter()
            .all(|seg| !seg.is_empty() && seg.chars().all(|c| c.is_ascii_alphanumeric()));
        if !ok {
            return Err(Error::InvalidSectionCode(s.to_string()));
        }
        Ok(SectionCode { segments })
    }
}

impl fmt::Display for SectionCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.segments.join("."))
    }
}

/// True iff `child` extends `parent` by exactly one dot-separated segment.
pub fn is_parent_code(parent: &SectionCode, child: &SectionCode) -> bool {
    child.segments.len() == parent.segments.len() + 1
        && child.segments[..parent.segments.len()] == parent.segments[..]
}

static HEADING: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^(?P<code>[A-Z]?[0-9]+(?:\.[0-9]+)*|[A-Z](?:\.[0-9]+)*)[ \t]+(?P<title>\S.*?)\s*$")
        .unwrap()
});

const MAX_HEADING_LEN: usize = 120;

fn heading_candidate(line: &str) -> Option<(SectionCode, &str)> {
    let line = line.trim_end();
    if line.len() > MAX_HEADING_LEN {
        return None;
    }
    let caps = HEADING.captures(line)?;
    let title = caps.name("title")?.as_str();
    if !title.starts_with(|c: char| c.is_uppercase()) || title.ends_with('.') {
        return None;
    }
    let code = caps["code"].parse().ok()?;
    Some((code, title))
}

fn successor(seg: &str) -> Option<String> {
    if let Ok(n) = seg.parse::<u64>() {
        return Some((n + 1).to_string());
    }
    let mut chars = seg.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) if c.is_ascii_uppercase() && c != 'Z' => {
            Some(((c as u8) + 1) as char).map(|c| c.to_string())
        }
        _ => None,
    }
}

fn is_letter_segment(seg: &str) -> bool {
    seg.len() == 1 && seg.chars().all(|c| c.is_ascii_uppercase())
}

/// A code is plausible after `prev` if it opens the first child of `prev`,
/// continues `prev` or one of its ancestors with the next sibling, or starts
/// the first annex.
fn plausible_next(prev: Option<&SectionCode>, next: &SectionCode, annex_started: bool) -> bool {
    let Some(prev) = prev else {
        return next.depth() == 1;
    };
    if is_parent_code(prev, next) && next.segments.last().is_some_and(|s| s == "1") {
        return true;
    }
    for upto in 0..prev.depth() {
        if let Some(succ) = successor(&prev.segments[upto]) {
            if prev.with_last(upto, succ) == *next {
                return true;
            }
        }
    }
    !annex_started && next.segments == ["A"]
}

#[derive(Debug, Clone)]
struct Heading {
    line: usize,
    code: SectionCode,
    title: String,
}

fn normalize_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn detect_headings(lines: &[&str]) -> Vec<Heading> {
    let mut out: Vec<Heading> = Vec::new();
    let mut annex_started = false;
    for (i, line) in lines.iter().enumerate() {
        let Some((code, title)) = heading_candidate(line) else {
            continue;
        };
        if plausible_next(out.last().map(|h| &h.code), &code, annex_started) {
            annex_started |= is_letter_segment(&code.segments[0]);
            out.push(Heading {
                line: i,
                code,
                title: normalize_ws(title),
            });
        }
    }
    out
}

fn locate_toc_headings(
    doc_id: &str,
    lines: &[&str],
    toc: &[(SectionCode, String)],
) -> Vec<Heading> {
    let mut out = Vec::new();
    let mut cursor = 0;
    for (code, title) in toc {
        let code_str = code.to_string();
        let want_title = normalize_ws(title).to_lowercase();
        let found = (cursor..lines.len()).find(|&i| {
            let line = normalize_ws(lines[i]);
            line.strip_prefix(&code_str)
                .and_then(|rest| rest.strip_prefix(' '))
                .is_some_and(|rest| rest.to_lowercase() == want_title)
        });
        match found {
            Some(i) => {
                out.push(Heading {
                    line: i,
                    code: code.clone(),
                    title: normalize_ws(title),
                });
                cursor = i + 1;
            }
            None => log::warn!(
                "{doc_id}: table-of-contents entry {code_str} {title:?} not found in text"
            ),
        }
    }
    out
}

/// Fraction of non-blank lines that must look like table rows.
const TABULAR_LINE_FRACTION: f64 = 0.5;

static CELL_SEPARATOR: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\t| {2,}|\|").unwrap());

/// A body is tabular if at least half of its non-blank lines contain two or
/// more cell separators (tab, run of 2+ spaces, or `|`).
pub fn is_tabular(body: &str) -> bool {
    let lines: Vec<&str> = body
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .collect();
    if lines.is_empty() {
        return false;
    }
    let rows = lines
        .iter()
        .filter(|l| CELL_SEPARATOR.find_iter(l).count() >= 2)
        .count();
    rows as f64 >= TABULAR_LINE_FRACTION * lines.len() as f64
}

/// Segments one document into its document node followed by one unit per
/// heading, in text order. Text before the first heading (front matter) is
/// not attached to any unit.
pub fn parse_sections(entry: &DocumentEntry, text: &str) -> Result<Vec<InfoUnit>> {
    let lines: Vec<&str> = text.lines().collect();
    let headings = match &entry.toc {
        Some(toc) if !toc.is_empty() => {
            let toc: Vec<(SectionCode, String)> = toc
                .iter()
                .map(|t| Ok((t.code.parse::<SectionCode>()?, t.title.clone())))
                .collect::<Result<_>>()?;
            locate_toc_headings(&entry.doc_id, &lines, &toc)
        }
        _ => detect_headings(&lines),
    };
    if headings.is_empty() {
        return Err(Error::EmptyDocument(entry.doc_id.clone()));
    }

    let mut seen = HashSet::new();
    let mut units = vec![InfoUnit::document(&entry.doc_id, &entry.title)];
    for (k, h) in headings.iter().enumerate() {
        let code = h.code.to_string();
        if !seen.insert(code.clone()) {
            return Err(Error::DuplicateSection {
                doc_id: entry.doc_id.clone(),
                code,
            });
        }
        let end = headings.get(k + 1).map_or(lines.len(), |n| n.line);
        let body = lines[h.line + 1..end].join("\n").trim().to_string();
        units.push(InfoUnit {
            id: NodeId::section(&entry.doc_id, &code),
            doc_id: entry.doc_id.clone(),
            is_tabular: is_tabular(&body),
            section_code: Some(code.clone()),
            title: format!("{code} {}", h.title),
            body,
            kind: NodeKind::Section,
        });
    }
    Ok(units)
}

/// Links every section of one document to the nearest preceding unit whose
/// code it extends by one segment, falling back to the document node.
/// `units[0]` must be the document node.
pub fn link_parthood(units: &[InfoUnit]) -> Vec<(NodeId, NodeId)> {
    let Some(doc) = units.first() else {
        return Vec::new();
    };
    let codes: Vec<Option<SectionCode>> = units
        .iter()
        .map(|u| u.section_code.as_deref().and_then(|c| c.parse().ok()))
        .collect();
    let mut out = Vec::with_capacity(units.len().saturating_sub(1));
    for i in 1..units.len() {
        let parent = codes[i].as_ref().and_then(|child| {
            (1..i)
                .rev()
                .find(|&j| codes[j].as_ref().is_some_and(|p| is_parent_code(p, child)))
        });
        let parent = parent.map_or(&doc.id, |j| &units[j].id);
        out.push((units[i].id.clone(), parent.clone()));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::manifest::TocEntry;

    fn code(s: &str) -> SectionCode {
        s.parse().unwrap()
    }

    fn entry(toc: Option<Vec<TocEntry>>) -> DocumentEntry {
        DocumentEntry {
            doc_id: "D".into(),
            title: "Doc".into(),
            aliases: vec![],
            path: "unused".into(),
            toc,
        }
    }

    #[test]
    fn section_code_parsing() {
        assert_eq!(code("A.1").segments(), ["A", "1"]);
        assert!("1..2".parse::<SectionCode>().is_err());
        assert!("".parse::<SectionCode>().is_err());
        assert!("1.a-b".parse::<SectionCode>().is_err());
    }

    #[test]
    fn parent_code_rule() {
        assert!(is_parent_code(&code("1.2"), &code("1.2.3")));
        assert!(!is_parent_code(&code("1.2"), &code("1.3.1")));
        assert!(is_parent_code(&code("1.2"), &code("1.2.10")));
        assert!(!is_parent_code(&code("1"), &code("1.2.3")));
        assert!(!is_parent_code(&code("1.2"), &code("1.2")));
        assert!(is_parent_code(&code("A"), &code("A.1")));
    }

    #[test]
    fn segments_three_headings() {
        let text = "1 Scope\nThis document covers things.\n1.1 General\nGeneral text here.\nMore.\n2 References\nRef text.";
        let units = parse_sections(&entry(None), text).unwrap();
        let titles: Vec<&str> = units.iter().map(|u| u.title.as_str()).collect();
        assert_eq!(titles, ["Doc", "1 Scope", "1.1 General", "2 References"]);
        assert_eq!(units[0].body, "");
        assert_eq!(units[1].body, "This document covers things.");
        assert_eq!(units[2].body, "General text here.\nMore.");
        assert_eq!(units[3].body, "Ref text.");
    }

    #[test]
    fn empty_body_when_subheading_follows() {
        let text = "1 Scope\n1.1 General\nText.";
        let units = parse_sections(&entry(None), text).unwrap();
        assert_eq!(units[1].body, "");
        assert_eq!(units[2].body, "Text.");
    }

    #[test]
    fn no_headings_is_error() {
        let err =
            parse_sections(&entry(Some(vec![])), "just some prose.\nno headings").unwrap_err();
        assert!(matches!(err, Error::EmptyDocument(d) if d == "D"));
    }

    #[test]
    fn annex_heading_code() {
        let text = "1 Scope\nx.\nA Annex title\ny.\nA.1 Test conditions\nz.";
        let units = parse_sections(&entry(None), text).unwrap();
        assert_eq!(units[3].section_code.as_deref(), Some("A.1"));
        assert_eq!(code("A.1").segments(), ["A", "1"]);
    }

    #[test]
    fn in_body_false_positives_rejected() {
        // "3.1" is not a plausible successor of "1"; "10 V/m" is not either.
        let text = "1 Scope\nsee below\n3.1 Something odd\n10 V/m Level\n2 Next\nz.";
        let units = parse_sections(&entry(None), text).unwrap();
        let codes: Vec<_> = units
            .iter()
            .filter_map(|u| u.section_code.clone())
            .collect();
        assert_eq!(codes, ["1", "2"]);
        assert!(units[1].body.contains("3.1 Something odd"));
    }

    #[test]
    fn toc_guided_segmentation() {
        let toc = vec![
            TocEntry {
                code: "1".into(),
                title: "Scope".into(),
            },
            TocEntry {
                code: "1.1".into(),
                title: "General".into(),
            },
        ];
        let text = "Front matter\n1   Scope\nabc.\n1.1 General\ndef.";
        let units = parse_sections(&entry(Some(toc)), text).unwrap();
        assert_eq!(units.len(), 3);
        assert_eq!(units[1].body, "abc.");
        assert_eq!(units[2].body, "def.");
    }

    #[test]
    fn duplicate_code_in_toc_is_error() {
        let toc = vec![
            TocEntry {
                code: "1".into(),
                title: "Scope".into(),
            },
            TocEntry {
                code: "1".into(),
                title: "Scope".into(),
            },
        ];
        let text = "1 Scope\na.\n1 Scope\nb.";
        assert!(matches!(
            parse_sections(&entry(Some(toc)), text),
            Err(Error::DuplicateSection { .. })
        ));
    }

    #[test]
    fn tabular_detection() {
        assert!(is_tabular("a | b | c\n1 | 2 | 3\nnote"));
        assert!(is_tabular("Freq\t\tLevel\t\tLimit"));
        assert!(!is_tabular("A plain paragraph of text.\nAnother one."));
        assert!(!is_tabular(""));
    }

    fn units_with(codes: &[&str]) -> Vec<InfoUnit> {
        let mut units = vec![InfoUnit::document("D", "Doc")];
        for c in codes {
            units.push(InfoUnit {
                id: NodeId::section("D", c),
                doc_id: "D".into(),
                section_code: Some(c.to_string()),
                title: c.to_string(),
                body: String::new(),
                kind: NodeKind::Section,
                is_tabular: false,
            });
        }
        units
    }

    fn parents(codes: &[&str]) -> Vec<(String, String)> {
        link_parthood(&units_with(codes))
            .into_iter()
            .map(|(c, p)| (c.to_string(), p.to_string()))
            .collect()
    }

    #[test]
    fn linkage_examples() {
        let s = |a: &str, b: &str| (a.to_string(), b.to_string());
        assert_eq!(
            parents(&["1", "1.1", "1.2", "2"]),
            vec![
                s("D#1", "D"),
                s("D#1.1", "D#1"),
                s("D#1.2", "D#1"),
                s("D#2", "D")
            ]
        );
        assert_eq!(parents(&["3.2"]), vec![s("D#3.2", "D")]);
        assert_eq!(
            parents(&["A", "A.1"]),
            vec![s("D#A", "D"), s("D#A.1", "D#A")]
        );
    }
}
