//! Scoring retriever configurations against a Q&A dataset.
//!
//! A retrieved node is relevant when its text contains at least
//! `threshold` (default 75%) of some witness string as one contiguous
//! substring. Per question we compute recall, average precision and
//! reciprocal rank at a cutoff K, then average over questions.

use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embed::{smooth, SmoothingConfig};
use crate::error::{io_err, Error, Result};
use crate::ingest::Mode;
use crate::qa::{filter_valid_pairs, QaPair};
use crate::retrieval::{run_pipeline, IndexSet, PipelineConfig, RankedList};
use crate::tokenize::normalize_whitespace;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchRule {
    pub threshold: f64,
    pub normalize_whitespace: bool,
}

impl Default for MatchRule {
    fn default() -> Self {
        MatchRule {
            threshold: 0.75,
            normalize_whitespace: true,
        }
    }
}

impl MatchRule {
    pub fn check(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(Error::Config(format!(
                "match threshold must be in (0, 1], got {}",
                self.threshold
            )));
        }
        Ok(())
    }

    /// Characters of a golden string of `len` characters that must appear
    /// contiguously. The epsilon absorbs products like `0.7 * 10` landing a
    /// hair above an integer.
    pub fn required_length(&self, len: usize) -> usize {
        (self.threshold * len as f64 - 1e-9).ceil().max(0.0) as usize
    }

    fn prepare(&self, text: &str) -> Vec<char> {
        if self.normalize_whitespace {
            normalize_whitespace(text).chars().collect()
        } else {
            text.chars().collect()
        }
    }
}

/// Whether `a` and `b` share a common substring of at least `target`
/// elements. Dynamic program over suffix-match lengths with one rolling row;
/// returns as soon as the target is reached.
pub fn has_common_substring<T: PartialEq>(a: &[T], b: &[T], target: usize) -> bool {
    if target == 0 {
        return true;
    }
    if a.len() < target || b.len() < target {
        return false;
    }
    let mut row = vec![0u32; b.len() + 1];
    for x in a {
        let mut diag = 0u32;
        for (j, y) in b.iter().enumerate() {
            let above = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { 0 };
            if row[j + 1] as usize >= target {
                return true;
            }
            diag = above;
        }
    }
    false
}

/// Length of the longest common substring of `a` and `b`.
pub fn longest_common_substring<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut best = 0u32;
    let mut row = vec![0u32; b.len() + 1];
    for x in a {
        let mut diag = 0u32;
        for (j, y) in b.iter().enumerate() {
            let above = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { 0 };
            best = best.max(row[j + 1]);
            diag = above;
        }
    }
    best as usize
}

fn prepared_matches(golden: &[char], retrieved: &[char], rule: &MatchRule) -> bool {
    let target = rule.required_length(golden.len());
    if target == golden.len() && golden.len() <= retrieved.len() {
        return retrieved.windows(golden.len().max(1)).any(|w| w == golden) || golden.is_empty();
    }
    has_common_substring(golden, retrieved, target)
}

/// True iff, after optional whitespace normalization, some substring of
/// `golden` with at least `ceil(threshold · |golden|)` characters occurs in
/// `retrieved`.
pub fn chunk_matches(golden: &str, retrieved: &str, rule: &MatchRule) -> bool {
    let g = rule.prepare(golden);
    let r = rule.prepare(retrieved);
    prepared_matches(&g, &r, rule)
}

/// Relevance of the top-K results of one question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelevanceVector {
    pub k: usize,
    /// One entry per evaluated rank, `min(K, retrieved)` long.
    pub relevant: Vec<bool>,
    /// Number of golden chunks (witnesses).
    pub r: usize,
    /// Witness claimed at each rank, if any.
    pub claims: Vec<Option<usize>>,
}

impl RelevanceVector {
    pub fn matched(&self) -> Vec<usize> {
        let mut m: Vec<usize> = self.claims.iter().flatten().copied().collect();
        m.sort_unstable();
        m
    }

    pub fn first_relevant_rank(&self) -> Option<usize> {
        self.relevant.iter().position(|&x| x).map(|p| p + 1)
    }
}

/// Walks ranks in order; each rank claims the lowest-indexed witness it
/// matches among those not claimed yet.
pub fn claim_witnesses(
    r: usize,
    retrieved: usize,
    k: usize,
    mut matches: impl FnMut(usize, usize) -> bool,
) -> RelevanceVector {
    let depth = k.min(retrieved);
    let mut claimed = vec![false; r];
    let mut claims = Vec::with_capacity(depth);
    for pos in 0..depth {
        let hit = (0..r).find(|&w| !claimed[w] && matches(w, pos));
        if let Some(w) = hit {
            claimed[w] = true;
        }
        claims.push(hit);
    }
    RelevanceVector {
        k,
        relevant: claims.iter().map(Option::is_some).collect(),
        r,
        claims,
    }
}

pub fn relevance_vector(
    pair: &QaPair,
    results: &RankedList,
    node_texts: &[String],
    k: usize,
    rule: &MatchRule,
) -> RelevanceVector {
    let goldens: Vec<Vec<char>> = pair.witnesses.iter().map(|w| rule.prepare(w)).collect();
    let retrieved: Vec<Vec<char>> = results
        .entries
        .iter()
        .take(k)
        .map(|e| rule.prepare(&node_texts[e.node]))
        .collect();
    claim_witnesses(goldens.len(), retrieved.len(), k, |w, pos| {
        prepared_matches(&goldens[w], &retrieved[pos], rule)
    })
}

pub fn recall_at_k(rv: &RelevanceVector) -> f64 {
    if rv.r == 0 {
        return 0.0;
    }
    rv.claims.iter().flatten().count() as f64 / rv.r as f64
}

/// Average precision with the denominator capped at `min(r, K)`.
pub fn ap_at_k(rv: &RelevanceVector) -> f64 {
    let denom = rv.r.min(rv.k);
    if denom == 0 {
        return 0.0;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, &rel) in rv.relevant.iter().enumerate() {
        if rel {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    sum / denom as f64
}

pub fn reciprocal_rank(first_rank: Option<usize>) -> f64 {
    first_rank.map_or(0.0, |r| 1.0 / r as f64)
}

/// Mean reciprocal rank; questions without a hit contribute zero. `None`
/// for an empty question set.
pub fn mrr_at_k(first_ranks: &[Option<usize>]) -> Option<f64> {
    if first_ranks.is_empty() {
        return None;
    }
    Some(first_ranks.iter().map(|&r| reciprocal_rank(r)).sum::<f64>() / first_ranks.len() as f64)
}

/// One retriever configuration of the sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub name: String,
    pub mode: Mode,
    #[serde(default)]
    pub pipeline: PipelineConfig,
    /// Smoothing applied to the index embeddings in memory before querying.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smoothing: Option<SmoothingConfig>,
}

/// The three index builds, each dense-only and with RRF, plus smoothing and
/// expansion on structured chunks.
pub fn default_configs() -> Vec<EvalConfig> {
    let cfg = |name: &str, mode, use_rrf, use_expansion, smoothing: Option<f64>| EvalConfig {
        name: name.to_string(),
        mode,
        pipeline: PipelineConfig {
            use_rrf,
            use_expansion,
            ..PipelineConfig::default()
        },
        smoothing: smoothing.map(SmoothingConfig::new),
    };
    vec![
        cfg("vanilla", Mode::Vanilla, false, false, None),
        cfg("vanilla+rrf", Mode::Vanilla, true, false, None),
        cfg("structured", Mode::Structured, false, false, None),
        cfg("structured+rrf", Mode::Structured, true, false, None),
        cfg(
            "structured-chunks",
            Mode::StructuredChunks,
            false,
            false,
            None,
        ),
        cfg(
            "structured-chunks+rrf",
            Mode::StructuredChunks,
            true,
            false,
            None,
        ),
        cfg(
            "structured-chunks+smoothing",
            Mode::StructuredChunks,
            false,
            false,
            Some(0.5),
        ),
        cfg(
            "structured-chunks+rrf+expansion",
            Mode::StructuredChunks,
            true,
            true,
            None,
        ),
    ]
}

pub fn read_configs(path: &Path) -> Result<Vec<EvalConfig>> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let configs: Vec<EvalConfig> = serde_json::from_slice(&bytes)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    check_configs(&configs)?;
    Ok(configs)
}

pub fn check_configs(configs: &[EvalConfig]) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    for c in configs {
        if c.name.is_empty() || !seen.insert(c.name.as_str()) {
            return Err(Error::Config(format!(
                "config names must be unique and non-empty: {:?}",
                c.name
            )));
        }
        c.pipeline.check()?;
        if let Some(s) = &c.smoothing {
            s.check()?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionRecord {
    pub id: String,
    pub retrieved: Vec<String>,
    pub relevance: RelevanceVector,
    pub matched: Vec<usize>,
    pub first_relevant_rank: Option<usize>,
    pub recall: f64,
    pub ap: f64,
    pub rr: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingSummary {
    pub mean_ms: f64,
    pub p50_ms: f64,
    pub p95_ms: f64,
    pub max_ms: f64,
}

impl TimingSummary {
    pub fn from_samples(samples: &[f64]) -> Option<Self> {
        if samples.is_empty() {
            return None;
        }
        let mut s = samples.to_vec();
        s.sort_by(f64::total_cmp);
        let pct = |p: f64| s[((s.len() - 1) as f64 * p).round() as usize];
        Some(TimingSummary {
            mean_ms: s.iter().sum::<f64>() / s.len() as f64,
            p50_ms: pct(0.5),
            p95_ms: pct(0.95),
            max_ms: s[s.len() - 1],
        })
    }
}

/// Result of one (configuration, K) cell. Aggregates are `None` when the
/// cell has no questions or failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config_name: String,
    pub mode: Mode,
    pub k: usize,
    pub n_questions: usize,
    pub recall: Option<f64>,
    pub map: Option<f64>,
    pub mrr: Option<f64>,
    pub empty: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<TimingSummary>,
    pub questions: Vec<QuestionRecord>,
}

fn mean(xs: impl ExactSizeIterator<Item = f64>) -> Option<f64> {
    let n = xs.len();
    (n > 0).then(|| xs.sum::<f64>() / n as f64)
}

impl EvalReport {
    pub fn from_questions(
        config: &EvalConfig,
        k: usize,
        questions: Vec<QuestionRecord>,
        timing: bool,
    ) -> Self {
        let times: Vec<f64> = questions.iter().filter_map(|q| q.query_ms).collect();
        EvalReport {
            config_name: config.name.clone(),
            mode: config.mode,
            k,
            n_questions: questions.len(),
            recall: mean(questions.iter().map(|q| q.recall)),
            map: mean(questions.iter().map(|q| q.ap)),
            mrr: mean(questions.iter().map(|q| q.rr)),
            empty: questions.is_empty(),
            error: None,
            timing: if timing {
                TimingSummary::from_samples(&times)
            } else {
                None
            },
            questions,
        }
    }

    pub fn failed(config: &EvalConfig, k: usize, error: String) -> Self {
        EvalReport {
            config_name: config.name.clone(),
            mode: config.mode,
            k,
            n_questions: 0,
            recall: None,
            map: None,
            mrr: None,
            empty: true,
            error: Some(error),
            timing: None,
            questions: Vec::new(),
        }
    }
}

/// An index build made available to the sweep, or the reason it is not.
pub enum SweepIndex<'a> {
    Ready(&'a IndexSet),
    Failed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    pub ks: Vec<usize>,
    pub rule: MatchRule,
    /// Record wall-clock query times (makes reports non-reproducible).
    pub timing: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            ks: vec![4, 8, 16],
            rule: MatchRule::default(),
            timing: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutput {
    pub pairs_in: usize,
    pub pairs_valid: usize,
    pub reports: Vec<EvalReport>,
}

impl SweepOutput {
    pub fn failed_cells(&self) -> usize {
        self.reports.iter().filter(|r| r.error.is_some()).count()
    }
}

/// Memoized witness-versus-node matching for one index build; the same
/// pair is compared in many cells.
struct Matcher<'a> {
    rule: MatchRule,
    node_texts: Vec<Vec<char>>,
    witnesses: &'a [Vec<Vec<char>>],
    cache: Mutex<HashMap<(usize, usize, usize), bool>>,
}

impl<'a> Matcher<'a> {
    fn new(set: &IndexSet, witnesses: &'a [Vec<Vec<char>>], rule: MatchRule) -> Self {
        Matcher {
            rule,
            node_texts: set
                .graph
                .nodes()
                .par_iter()
                .map(|u| rule.prepare(&u.text()))
                .collect(),
            witnesses,
            cache: Mutex::new(HashMap::new()),
        }
    }

    fn matches(&self, pair: usize, witness: usize, node: usize) -> bool {
        let key = (pair, witness, node);
        if let Some(&hit) = self.cache.lock().unwrap().get(&key) {
            return hit;
        }
        let hit = prepared_matches(
            &self.witnesses[pair][witness],
            &self.node_texts[node],
            &self.rule,
        );
        self.cache.lock().unwrap().insert(key, hit);
        hit
    }
}

/// Evaluates every (config, K) cell over the pairs whose witnesses occur in
/// all supplied indexes. `indexes` maps each build mode to its index.
pub fn run_sweep(
    pairs: &[QaPair],
    indexes: &[(Mode, SweepIndex<'_>)],
    configs: &[EvalConfig],
    options: &SweepOptions,
) -> Result<SweepOutput> {
    options.rule.check()?;
    check_configs(configs)?;
    if options.ks.is_empty() || options.ks.contains(&0) {
        return Err(Error::Config("K values must be at least 1".into()));
    }

    let full_texts: Vec<String> = indexes
        .iter()
        .filter_map(|(_, i)| match i {
            SweepIndex::Ready(set) => Some(set.graph.full_text()),
            SweepIndex::Failed(_) => None,
        })
        .collect();
    let mut valid = filter_valid_pairs(pairs, &full_texts);
    let before = valid.len();
    valid.retain(|p| !p.witnesses.is_empty());
    if valid.len() < before {
        log::warn!("{} pairs without witnesses excluded", before - valid.len());
    }
    valid.sort_by(|a, b| a.id.cmp(&b.id));
    log::info!(
        "{} of {} pairs valid in every index",
        valid.len(),
        pairs.len()
    );

    let witnesses: Vec<Vec<Vec<char>>> = valid
        .iter()
        .map(|p| {
            p.witnesses
                .iter()
                .map(|w| options.rule.prepare(w))
                .collect()
        })
        .collect();
    let matchers: Vec<Option<Matcher>> = indexes
        .iter()
        .map(|(_, i)| match i {
            SweepIndex::Ready(set) => Some(Matcher::new(set, &witnesses, options.rule)),
            SweepIndex::Failed(_) => None,
        })
        .collect();

    let mut reports = Vec::new();
    for config in configs {
        let Some(slot) = indexes.iter().position(|(m, _)| *m == config.mode) else {
            for &k in &options.ks {
                reports.push(EvalReport::failed(
                    config,
                    k,
                    format!("no {} index supplied", config.mode),
                ));
            }
            continue;
        };
        let set = match &indexes[slot].1 {
            SweepIndex::Ready(set) => *set,
            SweepIndex::Failed(msg) => {
                for &k in &options.ks {
                    reports.push(EvalReport::failed(config, k, msg.clone()));
                }
                continue;
            }
        };
        let matcher = matchers[slot].as_ref().expect("ready index has a matcher");

        let smoothed;
        let set = match &config.smoothing {
            None => set,
            Some(s) => {
                smoothed = IndexSet {
                    graph: set.graph.clone(),
                    sparse: set.sparse.clone(),
                    embeddings: smooth(&set.embeddings, &set.graph, s)?,
                    embedder: set.embedder.clone(),
                };
                &smoothed
            }
        };

        for &k in &options.ks {
            let pipeline = config.pipeline.with_k(k);
            let records: Result<Vec<QuestionRecord>> = valid
                .par_iter()
                .enumerate()
                .map(|(pi, pair)| {
                    let started = Instant::now();
                    let out = run_pipeline(&pair.question, set, &pipeline)?;
                    let elapsed = started.elapsed().as_secs_f64() * 1e3;
                    let results = &out.results.entries;
                    let rv = claim_witnesses(pair.witnesses.len(), results.len(), k, |w, pos| {
                        matcher.matches(pi, w, results[pos].node)
                    });
                    let first = rv.first_relevant_rank();
                    Ok(QuestionRecord {
                        id: pair.id.clone(),
                        retrieved: results
                            .iter()
                            .map(|e| set.graph.node(e.node).id.to_string())
                            .collect(),
                        matched: rv.matched(),
                        first_relevant_rank: first,
                        recall: recall_at_k(&rv),
                        ap: ap_at_k(&rv),
                        rr: reciprocal_rank(first),
                        relevance: rv,
                        query_ms: options.timing.then_some(elapsed),
                    })
                })
                .collect();
            reports.push(match records {
                Ok(q) => EvalReport::from_questions(config, k, q, options.timing),
                Err(e) => EvalReport::failed(config, k, e.to_string()),
            });
        }
    }
    Ok(SweepOutput {
        pairs_in: pairs.len(),
        pairs_valid: valid.len(),
        reports,
    })
}

fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "-_+.".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect()
}

pub fn report_file_name(config_name: &str, k: usize) -> String {
    format!("report_{}_{k}.json", file_stem(config_name))
}

fn fmt_metric(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.6}")).unwrap_or_default()
}

/// `config,K,recall,map,mrr,n_questions,mean_query_ms`, one row per cell.
pub fn summary_csv(reports: &[EvalReport]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Config(format!("csv: {e}"));
    w.write_record([
        "config",
        "K",
        "recall",
        "map",
        "mrr",
        "n_questions",
        "mean_query_ms",
    ])
    .map_err(csv_err)?;
    for r in reports {
        w.write_record([
            r.config_name.clone(),
            r.k.to_string(),
            fmt_metric(r.recall),
            fmt_metric(r.map),
            fmt_metric(r.mrr),
            r.n_questions.to_string(),
            r.timing
                .as_ref()
                .map(|t| format!("{:.3}", t.mean_ms))
                .unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Config(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Writes `report_<config>_<K>.json` per cell and `summary.csv` into `dir`.
pub fn write_reports(dir: &Path, reports: &[EvalReport]) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    for r in reports {
        let path = dir.join(report_file_name(&r.config_name, r.k));
        let mut bytes = serde_json::to_vec_pretty(r)?;
        bytes.push(b'\n');
        fs::write(&path, bytes).map_err(io_err(&path))?;
    }
    let path = dir.join("summary.csv");
    fs::write(&path, summary_csv(reports)?).map_err(io_err(&path))
}
