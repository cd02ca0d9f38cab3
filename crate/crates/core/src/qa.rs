//! Synthetic question/answer pairs for retrieval evaluation.
//!
//! The dataset is built from each document's raw text, independently of the
//! graph construction code: flat token chunks, a normativity filter (enough
//! real words and at least one modal verb), seeded sampling, and one
//! generated pair per sampled chunk. Every pair carries witness strings,
//! verbatim spans of its chunk that serve as golden chunks at evaluation
//! time.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{io_err, Error, Result};
use crate::ingest::CorpusManifest;
use crate::tokenize::{is_stopword, normalize_whitespace};

pub const MODAL_VERBS: [&str; 9] = [
    "shall", "must", "should", "may", "can", "will", "might", "could", "would",
];

pub const PROMPT_TEMPLATE: &str = include_str!("../assets/qa_prompt_v1.txt");
pub const PROMPT_VERSION: &str = "qa_prompt_v1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalChunk {
    pub doc_id: String,
    pub ordinal: usize,
    pub text: String,
    pub word_count: usize,
    pub modal_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaPair {
    pub id: String,
    pub question: String,
    pub answer: String,
    pub source_doc: String,
    pub source_chunk: String,
    pub witnesses: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QaBackend {
    RemoteLlm,
    OfflineTemplate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemoteLlmConfig {
    pub endpoint: String,
    /// Environment variable holding a bearer token.
    #[serde(default)]
    pub auth_env: Option<String>,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

fn default_in_flight() -> usize {
    4
}

fn default_timeout() -> u64 {
    120
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthesisConfig {
    pub chunk_max_tokens: usize,
    pub min_words: usize,
    pub min_word_chars: usize,
    pub min_modals: usize,
    pub sample_n: usize,
    pub backend: QaBackend,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub remote: Option<RemoteLlmConfig>,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        SynthesisConfig {
            chunk_max_tokens: 400,
            min_words: 40,
            min_word_chars: 2,
            min_modals: 1,
            sample_n: 1000,
            backend: QaBackend::OfflineTemplate,
            seed: 7,
            remote: None,
        }
    }
}

impl SynthesisConfig {
    pub fn check(&self) -> Result<()> {
        if self.chunk_max_tokens == 0 || self.min_word_chars == 0 {
            return Err(Error::Config(
                "chunk size and word length must be at least 1".into(),
            ));
        }
        if self.backend == QaBackend::RemoteLlm && self.remote.is_none() {
            return Err(Error::Config("remote_llm backend needs an endpoint".into()));
        }
        Ok(())
    }
}

/// Space-delimited strings of at least `min_chars` characters.
pub fn count_words(text: &str, min_chars: usize) -> usize {
    text.split_whitespace()
        .filter(|w| w.chars().count() >= min_chars)
        .count()
}

fn is_modal(word: &str) -> bool {
    let lower = word.to_lowercase();
    MODAL_VERBS.contains(&lower.as_str())
}

/// Whole-word, case-insensitive modal verb occurrences.
pub fn count_modals(text: &str) -> usize {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| is_modal(w))
        .count()
}

/// Greedy split into runs of at most `chunk_max_tokens` whitespace tokens.
pub fn flat_chunk(doc_id: &str, doc_text: &str, config: &SynthesisConfig) -> Vec<EvalChunk> {
    let tokens: Vec<&str> = doc_text.split_whitespace().collect();
    tokens
        .chunks(config.chunk_max_tokens.max(1))
        .enumerate()
        .map(|(ordinal, toks)| {
            let text = toks.join(" ");
            EvalChunk {
                doc_id: doc_id.to_string(),
                ordinal,
                word_count: count_words(&text, config.min_word_chars),
                modal_count: count_modals(&text),
                text,
            }
        })
        .collect()
}

pub fn filter_chunks(chunks: Vec<EvalChunk>, config: &SynthesisConfig) -> Vec<EvalChunk> {
    chunks
        .into_iter()
        .filter(|c| c.word_count >= config.min_words && c.modal_count >= config.min_modals)
        .collect()
}

/// Sentences end at `.`, `!` or `?` followed by whitespace or the end of the
/// text; dotted codes such as "7.2" therefore do not split.
pub fn split_sentences(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if matches!(c, '.' | '!' | '?') {
            let end = i + c.len_utf8();
            if chars.peek().is_none_or(|&(_, n)| n.is_whitespace()) {
                let s = text[start..end].trim();
                if !s.is_empty() {
                    out.push(s);
                }
                start = end;
            }
        }
    }
    let rest = text[start..].trim();
    if !rest.is_empty() {
        out.push(rest);
    }
    out
}

/// A question/answer/witness triple before it is attached to a chunk.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Generated {
    pub question: String,
    pub answer: String,
    pub witnesses: Vec<String>,
}

/// Deterministic template generator: the first sentence with a modal verb is
/// both the answer and the only witness.
pub fn offline_generate(chunk: &EvalChunk) -> Option<Generated> {
    let sentence = split_sentences(&chunk.text)
        .into_iter()
        .find(|s| count_modals(s) > 0)?;
    let focus: Vec<&str> = sentence
        .split_whitespace()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()))
        .filter(|w| !w.is_empty() && !is_stopword(&w.to_lowercase()))
        .take(8)
        .collect();
    Some(Generated {
        question: format!(
            "According to {}, what is required regarding: {}?",
            chunk.doc_id,
            focus.join(" ")
        ),
        answer: sentence.to_string(),
        witnesses: vec![sentence.to_string()],
    })
}

pub fn render_prompt(chunk: &EvalChunk) -> String {
    PROMPT_TEMPLATE
        .replace("{doc_id}", &chunk.doc_id)
        .replace("{context}", &chunk.text)
}

pub struct RemoteGenerator {
    config: RemoteLlmConfig,
    agent: ureq::Agent,
}

#[derive(Serialize)]
struct PromptRequest<'a> {
    prompt: &'a str,
}

impl RemoteGenerator {
    pub fn new(config: RemoteLlmConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .build()
            .into();
        RemoteGenerator { config, agent }
    }

    pub fn generate(&self, chunk: &EvalChunk) -> std::result::Result<Generated, String> {
        let prompt = render_prompt(chunk);
        let mut req = self.agent.post(&self.config.endpoint);
        if let Some(var) = &self.config.auth_env {
            let token = std::env::var(var).map_err(|_| format!("${var} is not set"))?;
            req = req.header("Authorization", &format!("Bearer {token}"));
        }
        let mut resp = req
            .send_json(&PromptRequest { prompt: &prompt })
            .map_err(|e| e.to_string())?;
        resp.body_mut()
            .read_json::<Generated>()
            .map_err(|e| format!("unparseable response: {e}"))
    }
}

/// Keeps a generation only if it has at least one witness and every witness
/// occurs in the chunk (after whitespace normalization).
pub fn accept(chunk: &EvalChunk, generated: Generated, id: String) -> Option<QaPair> {
    let context = normalize_whitespace(&chunk.text);
    let witnesses: Vec<String> = generated
        .witnesses
        .iter()
        .map(|w| normalize_whitespace(w))
        .collect();
    if witnesses.is_empty()
        || witnesses
            .iter()
            .any(|w| w.is_empty() || !context.contains(w.as_str()))
    {
        log::debug!("{id}: discarding pair with a witness not found in its chunk");
        return None;
    }
    Some(QaPair {
        id,
        question: generated.question,
        answer: generated.answer,
        source_doc: chunk.doc_id.clone(),
        source_chunk: chunk.text.clone(),
        witnesses,
    })
}

pub enum Generator {
    Offline,
    Remote(RemoteGenerator),
}

impl Generator {
    pub fn from_config(config: &SynthesisConfig) -> Result<Self> {
        config.check()?;
        Ok(match config.backend {
            QaBackend::OfflineTemplate => Generator::Offline,
            QaBackend::RemoteLlm => Generator::Remote(RemoteGenerator::new(
                config.remote.clone().expect("checked"),
            )),
        })
    }

    fn max_in_flight(&self) -> usize {
        match self {
            Generator::Offline => 1,
            Generator::Remote(r) => r.config.max_in_flight.max(1),
        }
    }
}

/// One pair for one chunk, or `None` when the backend fails or the output
/// violates the witness invariant.
pub fn generate_pair(chunk: &EvalChunk, generator: &Generator, id: String) -> Option<QaPair> {
    let generated = match generator {
        Generator::Offline => {
            let g = offline_generate(chunk);
            debug_assert!(g.is_some() || chunk.modal_count == 0);
            g?
        }
        Generator::Remote(r) => match r.generate(chunk) {
            Ok(g) => g,
            Err(e) => {
                log::warn!(
                    "{id} ({} chunk {}): generation failed: {e}",
                    chunk.doc_id,
                    chunk.ordinal
                );
                return None;
            }
        },
    };
    accept(chunk, generated, id)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub prompt_version: String,
    pub config: SynthesisConfig,
    pub eligible_chunks: usize,
    pub sampled: usize,
    pub generated: usize,
    pub discarded: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub pairs: Vec<QaPair>,
    pub meta: DatasetMeta,
}

/// Chunks and filters every document, samples `sample_n` chunks without
/// replacement using the seed, and generates one pair per sampled chunk.
/// Output keeps the sampled order whatever the completion order.
pub fn synthesize_dataset(manifest: &CorpusManifest, config: &SynthesisConfig) -> Result<Dataset> {
    let generator = Generator::from_config(config)?;
    let per_doc: Vec<Result<Vec<EvalChunk>>> = manifest
        .documents
        .par_iter()
        .map(|d| {
            let text = manifest.read_text(d)?;
            Ok(filter_chunks(flat_chunk(&d.doc_id, &text, config), config))
        })
        .collect();
    let mut eligible = Vec::new();
    for chunks in per_doc {
        eligible.extend(chunks?);
    }

    let amount = if config.sample_n > eligible.len() {
        log::warn!(
            "only {} eligible chunks for {} requested pairs; using all",
            eligible.len(),
            config.sample_n
        );
        eligible.len()
    } else {
        config.sample_n
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let picks = rand::seq::index::sample(&mut rng, eligible.len(), amount).into_vec();
    let width = amount.to_string().len().max(4);
    let ids: Vec<String> = (1..=amount).map(|i| format!("q{i:0width$}")).collect();

    let slots: Vec<Mutex<Option<QaPair>>> = (0..amount).map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..generator.max_in_flight().min(amount.max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= amount {
                    break;
                }
                let pair = generate_pair(&eligible[picks[i]], &generator, ids[i].clone());
                *slots[i].lock().unwrap() = pair;
            });
        }
    });
    let pairs: Vec<QaPair> = slots
        .into_iter()
        .filter_map(|m| m.into_inner().unwrap())
        .collect();

    Ok(Dataset {
        meta: DatasetMeta {
            prompt_version: PROMPT_VERSION.to_string(),
            config: config.clone(),
            eligible_chunks: eligible.len(),
            sampled: amount,
            generated: pairs.len(),
            discarded: amount - pairs.len(),
        },
        pairs,
    })
}

/// Keeps the pairs whose every witness (whitespace-normalized) occurs in
/// every index's full text.
pub fn filter_valid_pairs(pairs: &[QaPair], index_full_texts: &[String]) -> Vec<QaPair> {
    let texts: Vec<String> = index_full_texts
        .iter()
        .map(|t| normalize_whitespace(t))
        .collect();
    pairs
        .iter()
        .filter(|p| {
            p.witnesses.iter().all(|w| {
                let w = normalize_whitespace(w);
                texts.iter().all(|t| t.contains(w.as_str()))
            })
        })
        .cloned()
        .collect()
}

pub fn write_jsonl(path: &Path, pairs: &[QaPair]) -> Result<()> {
    let mut buf = Vec::new();
    for p in pairs {
        serde_json::to_writer(&mut buf, p)?;
        buf.push(b'\n');
    }
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(&buf).map_err(io_err(path))
}

pub fn read_jsonl(path: &Path) -> Result<Vec<QaPair>> {
    let f = fs::File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for line in BufReader::new(f).lines() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> SynthesisConfig {
        SynthesisConfig::default()
    }

    fn chunk(text: &str) -> EvalChunk {
        let c = cfg();
        EvalChunk {
            doc_id: "D1".into(),
            ordinal: 0,
            text: text.into(),
            word_count: count_words(text, c.min_word_chars),
            modal_count: count_modals(text),
        }
    }

    fn filler(n: usize) -> String {
        (0..n)
            .map(|i| format!("word{i}"))
            .collect::<Vec<_>>()
            .join(" ")
    }

    #[test]
    fn flat_chunk_sizes() {
        let sizes = |n: usize| -> Vec<usize> {
            flat_chunk("D", &filler(n), &cfg())
                .iter()
                .map(|c| c.text.split_whitespace().count())
                .collect()
        };
        assert_eq!(sizes(100), [100]);
        assert_eq!(sizes(900), [400, 400, 100]);
        assert!(sizes(0).is_empty());
        let chunks = flat_chunk("D", &filler(900), &cfg());
        assert_eq!(
            chunks.iter().map(|c| c.ordinal).collect::<Vec<_>>(),
            [0, 1, 2]
        );
        assert!(chunks.iter().all(|c| c.doc_id == "D"));
    }

    #[test]
    fn modal_counting_is_whole_word() {
        assert_eq!(
            count_modals("The EUT SHALL pass; it may fail. Shallow canopy."),
            2
        );
        assert_eq!(count_modals("cannot willing"), 0);
    }

    #[test]
    fn chunk_filters() {
        let noise = chunk(".. .. ..");
        let normative = chunk(&format!("{} The device shall comply.", filler(46)));
        let plain = chunk(&format!("{} The device complies.", filler(47)));
        let kept = filter_chunks(vec![noise, normative.clone(), plain], &cfg());
        assert_eq!(kept, vec![normative]);
    }

    #[test]
    fn sentence_splitting() {
        let s = split_sentences("See clause 7.2 now. The EUT shall pass! Done");
        assert_eq!(s, ["See clause 7.2 now.", "The EUT shall pass!", "Done"]);
    }

    #[test]
    fn offline_template() {
        let c = chunk("Intro text here. The EUT shall meet the limits of clause 7.2 at all ports. Later it may rest.");
        let g = offline_generate(&c).unwrap();
        assert_eq!(
            g.witnesses,
            ["The EUT shall meet the limits of clause 7.2 at all ports."]
        );
        assert_eq!(
            g.question,
            "According to D1, what is required regarding: EUT shall meet limits clause 7.2 ports?"
        );
        assert!(offline_generate(&chunk("No modal sentence at all.")).is_none());
    }

    #[test]
    fn witness_must_be_in_chunk() {
        let c = chunk("The EUT shall pass.");
        let bad = Generated {
            question: "q".into(),
            answer: "a".into(),
            witnesses: vec!["The EUT must pass.".into()],
        };
        assert!(accept(&c, bad, "q1".into()).is_none());
        let good = Generated {
            question: "q".into(),
            answer: "a".into(),
            witnesses: vec!["EUT  shall\npass".into()],
        };
        assert_eq!(
            accept(&c, good, "q1".into()).unwrap().witnesses,
            ["EUT shall pass"]
        );
        let none = Generated {
            question: "q".into(),
            answer: "a".into(),
            witnesses: vec![],
        };
        assert!(accept(&c, none, "q1".into()).is_none());
    }

    fn pair(id: &str, witness: &str) -> QaPair {
        QaPair {
            id: id.into(),
            question: "q".into(),
            answer: "a".into(),
            source_doc: "D".into(),
            source_chunk: witness.into(),
            witnesses: vec![witness.into()],
        }
    }

    #[test]
    fn validity_filter() {
        let texts = vec![
            "alpha beta\ngamma".to_string(),
            "x alpha  beta gamma y".to_string(),
        ];
        let pairs = vec![
            pair("q1", "alpha beta gamma"),
            pair("q2", "alpha beta gamma ±"),
        ];
        let kept = filter_valid_pairs(&pairs, &texts);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].id, "q1");
        assert!(filter_valid_pairs(&[], &texts).is_empty());
    }

    #[test]
    fn jsonl_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("qa.jsonl");
        let pairs = vec![pair("q1", "a b"), pair("q2", "c d")];
        write_jsonl(&path, &pairs).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.starts_with(r#"{"id":"q1","question":"q","answer":"a","source_doc":"D","source_chunk":"a b","witnesses":["a b"]}"#));
        assert_eq!(read_jsonl(&path).unwrap(), pairs);
    }

    #[test]
    fn prompt_mentions_verbatim_quotes() {
        let p = render_prompt(&chunk("CTX"));
        assert!(p.contains("D1") && p.ends_with("CTX\n"));
        assert!(p.contains("verbatim"));
    }
}
