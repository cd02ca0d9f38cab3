//! Deterministic synthetic corpus of standards-like documents.
//!
//! Each document has a title line followed by numbered sections (scope,
//! references, a definitions table in some documents, requirements with
//! subsections, test methods, sometimes an annex). Bodies are built from a
//! per-document technical vocabulary and contain modal-verb sentences that
//! quote their own clause numbers, internal clause references, and
//! references to other documents. Every document cites its successor (ring)
//! and one more distant document, so the document-level citation graph is
//! connected.
//!
//! The generator also returns the structure it emitted, which tests use as
//! ground truth for parsing.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::error::{io_err, Result};

const VOCABULARY: &[&str] = &[
    "emission",
    "immunity",
    "harmonic",
    "flicker",
    "surge",
    "burst",
    "antenna",
    "spurious",
    "bandwidth",
    "modulation",
    "carrier",
    "attenuation",
    "impedance",
    "coupling",
    "enclosure",
    "cable",
    "ground",
    "shielding",
    "filter",
    "transient",
    "interference",
    "susceptibility",
    "spectrum",
    "channel",
    "voltage",
    "current",
    "frequency",
    "tolerance",
    "stability",
    "leakage",
    "insulation",
    "thermal",
    "humidity",
    "vibration",
    "battery",
    "charger",
    "firmware",
    "interface",
    "protocol",
    "latency",
    "encryption",
    "authentication",
    "logging",
    "integrity",
    "redundancy",
    "calibration",
    "traceability",
    "uncertainty",
    "sampling",
    "detector",
    "quasipeak",
    "dwell",
    "sweep",
    "resolution",
    "polarization",
    "chamber",
    "turntable",
    "mast",
    "oscillator",
    "synthesizer",
    "amplifier",
    "mixer",
    "coupler",
    "divider",
    "probe",
    "clamp",
    "mains",
    "telecom",
    "signalling",
    "handover",
    "roaming",
    "paging",
    "beacon",
    "preamble",
    "jitter",
    "crosstalk",
    "squelch",
    "deviation",
    "blocking",
    "desensitization",
    "intermodulation",
    "selectivity",
    "occupancy",
    "hopping",
    "backoff",
    "fading",
    "multipath",
    "diversity",
];

const DOMAINS: &[&str] = &[
    "radio equipment",
    "power supplies",
    "wireless terminals",
    "broadcast receivers",
    "industrial controllers",
    "satellite earth stations",
    "short range devices",
    "maritime transceivers",
    "network gateways",
    "metering equipment",
];

const SUBJECTS: &[&str] = &[
    "The equipment under test",
    "The manufacturer",
    "The test laboratory",
    "The receiver",
    "The transmitter",
    "The apparatus",
    "The operator",
    "The host system",
];

const MODALS: &[&str] = &["shall", "shall", "shall", "should", "may", "must"];

const VERBS: &[&str] = &[
    "maintain",
    "verify",
    "record",
    "limit",
    "measure",
    "declare",
    "document",
    "calibrate",
    "suppress",
    "report",
    "monitor",
    "assess",
];

const TITLE_KINDS: &[&str] = &[
    "requirements",
    "limits",
    "conditions",
    "procedures",
    "performance",
    "assessment",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixtureSection {
    pub code: String,
    /// Heading title without the code.
    pub title: String,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixtureDoc {
    pub doc_id: String,
    pub title: String,
    pub alias: String,
    pub sections: Vec<FixtureSection>,
}

impl FixtureDoc {
    /// Title line, blank line, then each heading followed by its body.
    pub fn text(&self) -> String {
        let mut out = format!("{}\n\n", self.title);
        for s in &self.sections {
            out.push_str(&format!("{} {}\n", s.code, s.title));
            if !s.body.is_empty() {
                out.push_str(&s.body);
                out.push('\n');
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fixture {
    pub docs: Vec<FixtureDoc>,
}

pub const DEFAULT_DOCUMENTS: usize = 20;
pub const DEFAULT_SEED: u64 = 2024;

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

fn alias_of(i: usize) -> String {
    format!("XS {}", 101 + i)
}

struct Writer<'a> {
    rng: ChaCha8Rng,
    terms: Vec<&'a str>,
    aliases: Vec<String>,
    codes: Vec<String>,
}

impl<'a> Writer<'a> {
    fn term(&mut self) -> &'a str {
        self.terms
            .choose(&mut self.rng)
            .copied()
            .expect("non-empty vocabulary")
    }

    fn pick<'s>(&mut self, from: &[&'s str]) -> &'s str {
        from.choose(&mut self.rng).copied().expect("non-empty list")
    }

    fn modal_sentence(&mut self, own: &str, focus: &[&str]) -> String {
        let subject = self.pick(SUBJECTS);
        let modal = self.pick(MODALS);
        let verb = self.pick(VERBS);
        let (a, b) = (
            focus[self.rng.random_range(0..focus.len())],
            self.term().to_string(),
        );
        let extra = self.term().to_string();
        match self.rng.random_range(0..4) {
            0 => format!("Under clause {own} {} {modal} {verb} the {a} {b} of every {extra} port.", subject.to_lowercase()),
            1 => format!("{subject} {modal} {verb} the {a} {b} as required by clause {own}."),
            2 => format!("For clause {own} the {a} {b} {modal} not exceed the {extra} value declared for the {a}."),
            _ => format!("Where {a} applies, {} {modal} {verb} the {b} {extra} before the test.", subject.to_lowercase()),
        }
    }

    fn plain_sentence(&mut self, focus: &[&str]) -> String {
        let a = focus[self.rng.random_range(0..focus.len())];
        let b = self.term().to_string();
        match self.rng.random_range(0..3) {
            0 => format!("The {a} {b} arrangement is described in this clause."),
            1 => {
                let code = self.pick_code();
                format!("The {a} and {b} provisions are also discussed in clause {code}.")
            }
            _ => format!("Typical {a} values depend on the {b} configuration."),
        }
    }

    fn pick_code(&mut self) -> String {
        self.codes.choose(&mut self.rng).cloned().expect("codes")
    }

    fn paragraph(&mut self, own: &str, focus: &[&str], sentences: usize) -> String {
        let mut out = Vec::with_capacity(sentences);
        for _ in 0..sentences {
            if self.rng.random_bool(0.6) {
                out.push(self.modal_sentence(own, focus));
            } else {
                out.push(self.plain_sentence(focus));
            }
        }
        out.join(" ")
    }

    /// Opening sentence without a modal verb, followed by `paragraphs`
    /// paragraphs.
    fn body(&mut self, own: &str, paragraphs: &[usize]) -> String {
        let focus: Vec<&str> = (0..3).map(|_| self.term()).collect();
        let mut paras = vec![format!(
            "This clause covers the {} and {} provisions.",
            focus[0], focus[1]
        )];
        for &n in paragraphs {
            paras.push(self.paragraph(own, &focus, n));
        }
        paras.join("\n")
    }
}

impl Fixture {
    pub fn generate(documents: usize, seed: u64) -> Fixture {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let aliases: Vec<String> = (0..documents).map(alias_of).collect();
        let mut docs = Vec::with_capacity(documents);
        for i in 0..documents {
            let doc_seed = rng.random::<u64>();
            docs.push(generate_doc(i, documents, &aliases, doc_seed));
        }
        Fixture { docs }
    }

    pub fn default_corpus() -> Fixture {
        Self::generate(DEFAULT_DOCUMENTS, DEFAULT_SEED)
    }

    pub fn section_count(&self) -> usize {
        self.docs.iter().map(|d| d.sections.len()).sum()
    }

    /// Writes one text file per document plus `manifest.json`; returns the
    /// manifest path.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let docs_dir = dir.join("docs");
        fs::create_dir_all(&docs_dir).map_err(io_err(&docs_dir))?;
        let mut entries = Vec::new();
        for d in &self.docs {
            let rel = format!("docs/{}.txt", d.doc_id);
            let path = dir.join(&rel);
            fs::write(&path, d.text()).map_err(io_err(&path))?;
            entries.push(json!({
                "doc_id": d.doc_id,
                "title": d.title,
                "aliases": [d.alias],
                "path": rel,
            }));
        }
        let path = dir.join("manifest.json");
        let bytes = serde_json::to_vec_pretty(&json!({ "documents": entries }))?;
        fs::write(&path, bytes).map_err(io_err(&path))?;
        Ok(path)
    }
}

fn generate_doc(i: usize, documents: usize, aliases: &[String], seed: u64) -> FixtureDoc {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut terms: Vec<&str> = VOCABULARY.choose_multiple(&mut rng, 12).copied().collect();
    terms.sort_unstable();
    let domain = DOMAINS[i % DOMAINS.len()];

    let tabular_definitions = i % 3 == 0;
    let with_4_2_1 = rng.random_bool(0.2);
    let with_4_3 = rng.random_bool(0.2);
    let with_5_1 = rng.random_bool(0.3);
    let with_annex = rng.random_bool(0.25);
    let with_a1 = with_annex && rng.random_bool(0.5);
    let optional = [
        ("1", true),
        ("2", true),
        ("3", true),
        ("4", true),
        ("4.1", true),
        ("4.2", true),
        ("4.2.1", with_4_2_1),
        ("4.3", with_4_3),
        ("5", true),
        ("5.1", with_5_1),
        ("A", with_annex),
        ("A.1", with_a1),
    ];
    let codes: Vec<String> = optional
        .iter()
        .filter(|(_, keep)| *keep)
        .map(|(c, _)| c.to_string())
        .collect();

    let mut w = Writer {
        rng,
        terms,
        aliases: aliases.to_vec(),
        codes: codes.clone(),
    };
    let next = &w.aliases[(i + 1) % documents].clone();
    let far = &w.aliases[(i + 7) % documents].clone();
    let alias = w.aliases[i].clone();
    let long_code = if i % 2 == 0 { "4.1" } else { "5" };

    let mut sections = Vec::new();
    for code in &codes {
        let focus_title = capitalize(w.term());
        let (title, body) = match code.as_str() {
            "1" => (
                "Scope".to_string(),
                format!(
                    "This document specifies technical characteristics of {domain} with respect to {} and {}.\n{}",
                    w.term(),
                    w.term(),
                    w.paragraph(code, &["scope"], 2)
                ),
            ),
            "2" => (
                "Normative references".to_string(),
                format!(
                    "The following documents are referred to in the text.\n{next} covers the related {} provisions.\n{far} gives further guidance on {}.",
                    w.term(),
                    w.term()
                ),
            ),
            "3" if tabular_definitions => {
                let rows: Vec<String> = (0..6)
                    .map(|_| {
                        let t = capitalize(w.term());
                        let u = w.term().to_string();
                        format!("{t} ratio  |  measured against the {u} reference  |  dB")
                    })
                    .collect();
                ("Definitions".to_string(), format!("Term  |  Definition  |  Unit\n{}", rows.join("\n")))
            }
            "3" => {
                let a = w.term().to_string();
                let b = w.term().to_string();
                (
                    "Definitions".to_string(),
                    format!("For the purposes of this document the terms {a} and {b} have their usual meaning."),
                )
            }
            "4" | "A" => (
                if code == "4" { "Requirements".to_string() } else { "Measurement uncertainty".to_string() },
                String::new(),
            ),
            c if c == long_code => {
                let mut body = w.body(c, &[5, 6, 5, 6, 5, 6]);
                body.push_str(&format!(
                    "\nThe {} measurement shall follow {next}, clause 4.1 without modification.",
                    w.term().to_string()
                ));
                (format!("{focus_title} {}", w.pick(TITLE_KINDS)), body)
            }
            "4.2" => {
                let mut body = w.body("4.2", &[4, 3]);
                body.push_str(&format!(
                    "\nThe applicable {} limits shall be taken from clause 4.2 of {far}.",
                    w.term().to_string()
                ));
                (format!("{focus_title} {}", w.pick(TITLE_KINDS)), body)
            }
            c => {
                let n = w.rng.random_range(3..6);
                let sizes: Vec<usize> = (0..n).map(|_| w.rng.random_range(4..7)).collect();
                (format!("{focus_title} {}", w.pick(TITLE_KINDS)), w.body(c, &sizes))
            }
        };
        sections.push(FixtureSection {
            code: code.clone(),
            title,
            body,
        });
    }

    FixtureDoc {
        doc_id: format!("xs-{}", 101 + i),
        title: format!("{alias} Compatibility of {domain}"),
        alias,
        sections,
    }
}
