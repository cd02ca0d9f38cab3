//! Index directories: one build of graph, BM25 index and embeddings.
//!
//! Layout:
//!
//! ```text
//! <dir>/index.json            format version, mode, corpus hash
//! <dir>/graph.json
//! <dir>/bm25.json
//! <dir>/embeddings.bin
//! <dir>/embeddings_meta.json
//! <dir>/ingest_report.json
//! ```
//!
//! Directories are always written to a sibling temporary directory and
//! renamed into place, so readers never observe a partial index.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::embed::{
    embed_graph, smooth, Embedder, EmbedderSpec, EmbeddingMatrix, EmbeddingsMeta, SmoothingConfig,
};
use crate::error::{io_err, Error, Result};
use crate::ingest::{build_graph, CorpusManifest, IngestReport, MentionGrammar, Mode};
use crate::model::{GraphFile, InfoGraph};
use crate::retrieval::IndexSet;
use crate::sparse::{Bm25Params, SparseFile, SparseIndex};

pub const FORMAT_VERSION: u32 = 1;

pub const MANIFEST_FILE: &str = "index.json";
pub const GRAPH_FILE: &str = "graph.json";
pub const BM25_FILE: &str = "bm25.json";
pub const EMBEDDINGS_FILE: &str = "embeddings.bin";
pub const EMBEDDINGS_META_FILE: &str = "embeddings_meta.json";
pub const REPORT_FILE: &str = "ingest_report.json";

pub const INDEX_FILES: [&str; 5] = [
    GRAPH_FILE,
    BM25_FILE,
    EMBEDDINGS_FILE,
    EMBEDDINGS_META_FILE,
    REPORT_FILE,
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexManifest {
    pub version: u32,
    pub mode: Mode,
    pub files: Vec<String>,
    /// Seconds since the Unix epoch.
    pub created_at: u64,
    pub corpus_manifest_hash: String,
    /// Absolute path of the corpus manifest, used for staleness checks.
    pub corpus_manifest: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestOptions {
    pub mode: Mode,
    pub max_words: usize,
    pub bm25: Bm25Params,
    pub embedder: EmbedderSpec,
    pub smoothing: Option<SmoothingConfig>,
    pub grammar: MentionGrammar,
    /// Keep going when some documents fail, as long as one succeeds.
    pub allow_partial: bool,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            mode: Mode::StructuredChunks,
            max_words: crate::ingest::chunking::DEFAULT_MAX_WORDS,
            bm25: Bm25Params::default(),
            embedder: EmbedderSpec::local(crate::embed::DEFAULT_DIM),
            smoothing: None,
            grammar: MentionGrammar::default(),
            allow_partial: false,
        }
    }
}

pub struct BuiltIndex {
    pub mode: Mode,
    pub graph: InfoGraph,
    pub sparse: SparseIndex,
    pub embeddings: EmbeddingMatrix,
    pub meta: EmbeddingsMeta,
    pub report: IngestReport,
}

impl BuiltIndex {
    pub fn into_index_set(self) -> Result<IndexSet> {
        let embedder = Embedder::new(self.meta.embedder_spec())?;
        IndexSet::new(self.graph, self.sparse, self.embeddings, embedder)
    }
}

/// Runs ingestion, BM25 indexing and embedding (plus optional smoothing).
pub fn build_index(manifest: &CorpusManifest, options: &IngestOptions) -> Result<BuiltIndex> {
    let policy = options.mode.policy(options.max_words)?;
    options.bm25.check()?;
    if let Some(s) = &options.smoothing {
        s.check()?;
    }
    let embedder = Embedder::new(options.embedder.clone())?;

    let (graph, report) = build_graph(manifest, &policy, &options.grammar)?;
    if !report.errors.is_empty() && !options.allow_partial {
        let first = &report.errors[0];
        return Err(Error::DocumentsFailed {
            failed: report.errors.len(),
            first: format!("{}: {}", first.doc_id, first.message),
        });
    }
    let sparse = SparseIndex::build(&graph, options.bm25)?;
    let mut embeddings = embed_graph(&embedder, &graph)?;
    if let Some(s) = &options.smoothing {
        embeddings = smooth(&embeddings, &graph, s)?;
    }
    Ok(BuiltIndex {
        mode: options.mode,
        meta: EmbeddingsMeta::new(embedder.spec(), options.smoothing.as_ref()),
        graph,
        sparse,
        embeddings,
        report,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    fs::write(path, bytes).map_err(io_err(path))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn sibling(dir: &Path, tag: &str) -> Result<PathBuf> {
    let name = dir.file_name().ok_or_else(|| {
        Error::Config(format!(
            "index path {} has no final component",
            dir.display()
        ))
    })?;
    let parent = dir
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    Ok(parent.join(format!(
        ".{}.{tag}-{}",
        name.to_string_lossy(),
        std::process::id()
    )))
}

/// Fills a fresh temporary directory with `fill` and swaps it in for `dir`.
/// On any failure the temporary directory is removed and `dir` is untouched.
pub fn replace_dir_atomically(dir: &Path, fill: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
    let tmp = sibling(dir, "tmp")?;
    if tmp.exists() {
        fs::remove_dir_all(&tmp).map_err(io_err(&tmp))?;
    }
    if let Some(parent) = tmp.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    fs::create_dir(&tmp).map_err(io_err(&tmp))?;
    if let Err(e) = fill(&tmp) {
        let _ = fs::remove_dir_all(&tmp);
        return Err(e);
    }
    if dir.exists() {
        let old = sibling(dir, "old")?;
        fs::rename(dir, &old).map_err(io_err(dir))?;
        fs::rename(&tmp, dir).map_err(io_err(dir))?;
        fs::remove_dir_all(&old).map_err(io_err(&old))?;
    } else {
        fs::rename(&tmp, dir).map_err(io_err(dir))?;
    }
    Ok(())
}

fn absolute(path: &Path) -> PathBuf {
    fs::canonicalize(path).unwrap_or_else(|_| path.to_path_buf())
}

fn write_files(
    dir: &Path,
    graph: &GraphFile,
    sparse: &SparseFile,
    embeddings: &EmbeddingMatrix,
    meta: &EmbeddingsMeta,
    report: &IngestReport,
    manifest: &IndexManifest,
) -> Result<()> {
    write_json(&dir.join(GRAPH_FILE), graph)?;
    let bm25 = dir.join(BM25_FILE);
    fs::write(&bm25, serde_json::to_vec(sparse)?).map_err(io_err(&bm25))?;
    embeddings.write_bin(&dir.join(EMBEDDINGS_FILE))?;
    write_json(&dir.join(EMBEDDINGS_META_FILE), meta)?;
    write_json(&dir.join(REPORT_FILE), report)?;
    write_json(&dir.join(MANIFEST_FILE), manifest)
}

/// Writes a complete index directory at `dir`, replacing any previous one.
pub fn write_index(
    dir: &Path,
    built: &BuiltIndex,
    corpus_manifest_path: &Path,
    corpus: &CorpusManifest,
) -> Result<IndexManifest> {
    let manifest = IndexManifest {
        version: FORMAT_VERSION,
        mode: built.mode,
        files: INDEX_FILES.iter().map(|s| s.to_string()).collect(),
        created_at: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs()),
        corpus_manifest_hash: corpus.corpus_hash()?,
        corpus_manifest: absolute(corpus_manifest_path),
    };
    let graph = built.graph.to_file();
    let sparse = built.sparse.to_file();
    replace_dir_atomically(dir, |tmp| {
        write_files(
            tmp,
            &graph,
            &sparse,
            &built.embeddings,
            &built.meta,
            &built.report,
            &manifest,
        )
    })?;
    Ok(manifest)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OpenOptions {
    /// Recompute the corpus hash and refuse indexes built from other inputs.
    pub check_stale: bool,
}

impl Default for OpenOptions {
    fn default() -> Self {
        OpenOptions { check_stale: true }
    }
}

pub struct LoadedIndex {
    pub dir: PathBuf,
    pub manifest: IndexManifest,
    pub meta: EmbeddingsMeta,
    pub report: IngestReport,
    pub set: IndexSet,
}

pub fn read_manifest(dir: &Path) -> Result<IndexManifest> {
    let path = dir.join(MANIFEST_FILE);
    if !path.is_file() {
        return Err(Error::MissingIndex {
            path: dir.to_path_buf(),
            message: format!("{MANIFEST_FILE} not found"),
        });
    }
    // check the version before the full schema, which may have changed
    let raw: serde_json::Value = read_json(&path)?;
    let found = raw.get("version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
    if found != FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            path: dir.to_path_buf(),
            found,
            supported: FORMAT_VERSION,
        });
    }
    let manifest: IndexManifest = serde_json::from_value(raw).map_err(|e| Error::Format {
        path: path.clone(),
        message: e.to_string(),
    })?;
    if let Some(missing) = manifest.files.iter().find(|f| !dir.join(f).is_file()) {
        return Err(Error::MissingIndex {
            path: dir.to_path_buf(),
            message: format!("{missing} not found"),
        });
    }
    Ok(manifest)
}

pub fn check_fresh(dir: &Path, manifest: &IndexManifest) -> Result<()> {
    let stale = |message: String| Error::StaleIndex {
        path: dir.to_path_buf(),
        message,
    };
    let corpus = CorpusManifest::load(&manifest.corpus_manifest)
        .map_err(|e| stale(format!("corpus manifest unreadable: {e}")))?;
    let hash = corpus
        .corpus_hash()
        .map_err(|e| stale(format!("corpus unreadable: {e}")))?;
    if hash != manifest.corpus_manifest_hash {
        return Err(stale("corpus changed since the index was built".into()));
    }
    Ok(())
}

pub fn open_index(dir: &Path, options: OpenOptions) -> Result<LoadedIndex> {
    let manifest = read_manifest(dir)?;
    if options.check_stale {
        check_fresh(dir, &manifest)?;
    }
    let graph_path = dir.join(GRAPH_FILE);
    let graph = InfoGraph::from_file(read_json(&graph_path)?).map_err(|e| Error::Format {
        path: graph_path,
        message: e.to_string(),
    })?;
    let sparse = SparseIndex::from_file(read_json(&dir.join(BM25_FILE))?)?;
    let embeddings = EmbeddingMatrix::read_bin(&dir.join(EMBEDDINGS_FILE))?;
    let meta: EmbeddingsMeta = read_json(&dir.join(EMBEDDINGS_META_FILE))?;
    let report: IngestReport = read_json(&dir.join(REPORT_FILE))?;
    let embedder = Embedder::new(meta.embedder_spec())?;
    let set = IndexSet::new(graph, sparse, embeddings, embedder)?;
    Ok(LoadedIndex {
        dir: dir.to_path_buf(),
        manifest,
        meta,
        report,
        set,
    })
}

/// Recomputes the embeddings of an existing index with a new embedder
/// and/or smoothing, replacing the directory atomically.
pub fn reembed(
    dir: &Path,
    spec: EmbedderSpec,
    smoothing: Option<SmoothingConfig>,
) -> Result<IndexManifest> {
    let loaded = open_index(dir, OpenOptions::default())?;
    let embedder = Embedder::new(spec)?;
    let mut embeddings = embed_graph(&embedder, &loaded.set.graph)?;
    if let Some(s) = &smoothing {
        embeddings = smooth(&embeddings, &loaded.set.graph, s)?;
    }
    let meta = EmbeddingsMeta::new(embedder.spec(), smoothing.as_ref());
    let manifest = IndexManifest {
        created_at: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs()),
        ..loaded.manifest.clone()
    };
    let graph = loaded.set.graph.to_file();
    let sparse = loaded.set.sparse.to_file();
    replace_dir_atomically(dir, |tmp| {
        write_files(
            tmp,
            &graph,
            &sparse,
            &embeddings,
            &meta,
            &loaded.report,
            &manifest,
        )
    })?;
    Ok(manifest)
}
