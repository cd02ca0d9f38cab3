use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::json;

use normgraph::embed::{Backend, EmbedderSpec, SmoothingConfig};
use normgraph::eval::{self, run_sweep, MatchRule, SweepIndex, SweepOptions};
use normgraph::fixture::Fixture;
use normgraph::ingest::{CorpusManifest, Mode};
use normgraph::qa::{self, QaBackend, RemoteLlmConfig, SynthesisConfig};
use normgraph::retrieval::{run_pipeline, PipelineConfig, RankedList};
use normgraph::sparse::Bm25Params;
use normgraph::store::{self, IngestOptions, LoadedIndex, OpenOptions};
use normgraph::tokenize::TokenizerOptions;
use normgraph::Error;

use crate::args::{
    EmbedArgs, EmbedBackendArg, EmbedderArgs, EvaluateArgs, FixtureArgs, IngestArgs, QaBackendArg,
    QueryArgs, SmoothingArgs, SynthArgs,
};
use crate::exit::PartialFailure;

fn embedder_spec(a: &EmbedderArgs) -> EmbedderSpec {
    let mut spec = match a.embed_backend {
        EmbedBackendArg::Local => EmbedderSpec::local(a.embed_dim),
        EmbedBackendArg::RemoteHttp => EmbedderSpec {
            backend: Backend::RemoteHttp,
            model_name: "remote".into(),
            dim: a.embed_dim,
            endpoint: a.embed_endpoint.clone(),
            auth_env: a.embed_auth_env.clone(),
        },
    };
    if let Some(m) = &a.embed_model {
        spec.model_name = m.clone();
    }
    spec
}

fn smoothing(a: &SmoothingArgs) -> Option<SmoothingConfig> {
    a.smooth.then(|| SmoothingConfig {
        passes: a.passes,
        ..SmoothingConfig::new(a.alpha)
    })
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

pub fn ingest(a: IngestArgs) -> Result<()> {
    let manifest = CorpusManifest::load(&a.manifest)?;
    let options = IngestOptions {
        mode: a.mode.into(),
        max_words: a.max_words,
        bm25: Bm25Params {
            k1: a.k1,
            b: a.b,
            tokenizer: TokenizerOptions {
                stem: a.stem,
                remove_stopwords: a.stopwords,
            },
        },
        embedder: embedder_spec(&a.embedder),
        smoothing: smoothing(&a.smoothing),
        grammar: Default::default(),
        allow_partial: a.allow_partial,
    };
    let built = store::build_index(&manifest, &options)?;
    let written = store::write_index(&a.out, &built, &a.manifest, &manifest)?;
    let r = &built.report;
    log::info!(
        "{}: {} documents, {} nodes, {} citations ({} unresolved mentions)",
        a.out.display(),
        r.documents,
        r.nodes,
        r.citation_edges,
        r.mentions_unresolved
    );
    if a.json {
        print_json(&json!({ "status": "ok", "index": written, "report": r }))?;
    }
    Ok(())
}

pub fn embed(a: EmbedArgs) -> Result<()> {
    let written = store::reembed(
        &a.index,
        embedder_spec(&a.embedder),
        smoothing(&a.smoothing),
    )?;
    if a.json {
        print_json(&json!({ "status": "ok", "index": written }))?;
    }
    Ok(())
}

fn read_pipeline(path: Option<&Path>) -> Result<PipelineConfig> {
    let Some(path) = path else {
        return Ok(PipelineConfig::default());
    };
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_slice(&bytes)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())).into())
}

fn ids(index: &LoadedIndex, list: &RankedList) -> Vec<String> {
    list.entries
        .iter()
        .map(|e| index.set.graph.node(e.node).id.to_string())
        .collect()
}

fn snippet(body: &str) -> String {
    const MAX: usize = 200;
    let flat = normgraph::tokenize::normalize_whitespace(body);
    match flat.char_indices().nth(MAX) {
        Some((cut, _)) => format!("{}...", &flat[..cut]),
        None => flat,
    }
}

pub fn query(a: QueryArgs) -> Result<()> {
    let mut config = read_pipeline(a.config.as_deref())?;
    if let Some(n) = a.prefilter_n {
        config.prefilter_n = n;
    }
    config.use_rrf |= a.rrf;
    config.use_expansion |= a.expand;
    if let Some(k) = a.k {
        config = config.with_k(k);
    }
    config.check()?;
    let index = store::open_index(&a.index, OpenOptions::default())?;
    let out = run_pipeline(&a.text, &index.set, &config)?;

    let entries: Vec<_> = out
        .results
        .entries
        .iter()
        .map(|e| {
            let u = index.set.graph.node(e.node);
            json!({
                "node_id": u.id,
                "score": e.score,
                "doc_id": u.doc_id,
                "section_code": u.section_code,
                "title": u.title,
                "snippet": snippet(&u.body),
            })
        })
        .collect();
    if a.json {
        let trace = &out.trace;
        print_json(&json!({
            "query": a.text,
            "entries": entries,
            "trace": {
                "sparse": ids(&index, &trace.sparse),
                "dense": trace.dense.as_ref().map(|l| ids(&index, l)),
                "fused": trace.fused.as_ref().map(|l| ids(&index, l)),
                "expanded": trace.expanded.as_ref().map(|l| ids(&index, l)),
            },
        }))?;
    } else {
        for (rank, e) in out.results.entries.iter().enumerate() {
            let u = index.set.graph.node(e.node);
            println!("{:>3}  {:.4}  {}  {}", rank + 1, e.score, u.id, u.title);
        }
    }
    Ok(())
}

pub fn synth_qa(a: SynthArgs) -> Result<()> {
    let manifest = CorpusManifest::load(&a.manifest)?;
    let remote = match a.backend {
        QaBackendArg::Offline => None,
        QaBackendArg::Remote => Some(RemoteLlmConfig {
            endpoint: a
                .endpoint
                .clone()
                .ok_or_else(|| Error::Config("--backend remote requires --endpoint".into()))?,
            auth_env: a.auth_env.clone(),
            max_in_flight: a.max_in_flight,
            timeout_secs: 120,
        }),
    };
    let config = SynthesisConfig {
        chunk_max_tokens: a.chunk_max_tokens,
        min_words: a.min_words,
        min_word_chars: a.min_word_chars,
        min_modals: a.min_modals,
        sample_n: a.n,
        backend: match a.backend {
            QaBackendArg::Offline => QaBackend::OfflineTemplate,
            QaBackendArg::Remote => QaBackend::RemoteLlm,
        },
        seed: a.seed,
        remote,
    };
    let dataset = qa::synthesize_dataset(&manifest, &config)?;
    if let Some(dir) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    qa::write_jsonl(&a.out, &dataset.pairs)?;
    let meta_path = meta_path(&a.out);
    let mut meta = serde_json::to_vec_pretty(&dataset.meta)?;
    meta.push(b'\n');
    fs::write(&meta_path, meta).with_context(|| format!("writing {}", meta_path.display()))?;
    log::info!(
        "{} pairs written to {}",
        dataset.pairs.len(),
        a.out.display()
    );
    if a.json {
        print_json(&json!({ "status": "ok", "out": a.out, "meta": dataset.meta }))?;
    }
    Ok(())
}

fn meta_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    out.with_file_name(name)
}

pub fn evaluate(a: EvaluateArgs) -> Result<()> {
    let pairs = qa::read_jsonl(&a.dataset)?;
    let configs = match &a.configs {
        Some(path) => eval::read_configs(path)?,
        None => eval::default_configs(),
    };
    let options = SweepOptions {
        ks: a.ks.clone(),
        rule: MatchRule {
            threshold: a.threshold,
            ..MatchRule::default()
        },
        timing: a.timing,
    };

    let mut loaded: Vec<LoadedIndex> = Vec::new();
    let mut load_errors = Vec::new();
    for dir in &a.indexes {
        match store::open_index(dir, OpenOptions::default()) {
            Ok(index) => {
                if loaded
                    .iter()
                    .any(|l| l.manifest.mode == index.manifest.mode)
                {
                    return Err(Error::Config(format!(
                        "more than one {} index among --indexes",
                        index.manifest.mode
                    ))
                    .into());
                }
                loaded.push(index);
            }
            Err(e) => {
                log::error!("{}: {e}", dir.display());
                load_errors.push(json!({ "index": dir, "error": e.to_string() }));
            }
        }
    }
    if loaded.is_empty() {
        bail!(
            "none of the {} index directories could be opened",
            a.indexes.len()
        );
    }
    for l in &loaded {
        if l.meta.smoothed
            && configs
                .iter()
                .any(|c| c.mode == l.manifest.mode && c.smoothing.is_some())
        {
            return Err(Error::Config(format!(
                "{} already holds smoothed embeddings; a config asks to smooth them again",
                l.dir.display()
            ))
            .into());
        }
    }
    let indexes: Vec<(Mode, SweepIndex)> = loaded
        .iter()
        .map(|l| (l.manifest.mode, SweepIndex::Ready(&l.set)))
        .collect();

    let output = run_sweep(&pairs, &indexes, &configs, &options)?;
    eval::write_reports(&a.out, &output.reports)?;
    log::info!(
        "{} of {} pairs valid; {} cells written to {}",
        output.pairs_valid,
        output.pairs_in,
        output.reports.len(),
        a.out.display()
    );

    let failed = output.failed_cells();
    if a.json {
        let rows: Vec<_> = output
            .reports
            .iter()
            .map(|r| {
                json!({
                    "config": r.config_name,
                    "K": r.k,
                    "recall": r.recall,
                    "map": r.map,
                    "mrr": r.mrr,
                    "n_questions": r.n_questions,
                    "error": r.error,
                })
            })
            .collect();
        print_json(&json!({
            "status": if failed == 0 { "ok" } else { "partial" },
            "pairs_in": output.pairs_in,
            "pairs_valid": output.pairs_valid,
            "index_errors": load_errors,
            "cells": rows,
        }))?;
    }
    for r in output.reports.iter().filter(|r| r.error.is_some()) {
        log::warn!(
            "{} K={}: {}",
            r.config_name,
            r.k,
            r.error.as_deref().unwrap_or_default()
        );
    }
    if failed > 0 && a.strict {
        return Err(PartialFailure {
            failed,
            total: output.reports.len(),
        }
        .into());
    }
    Ok(())
}

pub fn fixture(a: FixtureArgs) -> Result<()> {
    let fixture = Fixture::generate(a.documents, a.seed);
    let path = fixture.write(&a.out)?;
    println!("{}", path.display());
    Ok(())
}
