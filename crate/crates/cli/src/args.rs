use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Graph-structured hybrid retrieval over normative documents.
#[derive(Debug, Parser)]
#[command(name = "normgraph", version, about)]
pub struct Cli {
    /// Worker threads for parallel stages (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,

    /// Log filter for stderr, e.g. `info` or `normgraph=debug`.
    #[arg(long, global = true, default_value = "warn")]
    pub log_level: String,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build an index directory (graph, BM25 index, embeddings) from a corpus manifest.
    Ingest(IngestArgs),
    /// Recompute or smooth the embeddings of an existing index directory.
    Embed(EmbedArgs),
    /// Run one query through the retrieval pipeline.
    Query(QueryArgs),
    /// Synthesize a question/answer evaluation dataset from a corpus.
    SynthQa(SynthArgs),
    /// Score retriever configurations against a question/answer dataset.
    Evaluate(EvaluateArgs),
    /// Write the bundled synthetic 20-document corpus to a directory.
    Fixture(FixtureArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Vanilla,
    Structured,
    StructuredChunks,
}

impl From<ModeArg> for normgraph::ingest::Mode {
    fn from(m: ModeArg) -> Self {
        use normgraph::ingest::Mode;
        match m {
            ModeArg::Vanilla => Mode::Vanilla,
            ModeArg::Structured => Mode::Structured,
            ModeArg::StructuredChunks => Mode::StructuredChunks,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EmbedBackendArg {
    /// Deterministic feature hashing, no network.
    Local,
    /// HTTP embedding service.
    RemoteHttp,
}

#[derive(Debug, Clone, Args)]
pub struct EmbedderArgs {
    #[arg(long, value_enum, default_value_t = EmbedBackendArg::Local)]
    pub embed_backend: EmbedBackendArg,

    /// Vector dimension.
    #[arg(long, default_value_t = normgraph::embed::DEFAULT_DIM)]
    pub embed_dim: usize,

    /// Model name recorded in embeddings_meta.json and sent to remote services.
    #[arg(long)]
    pub embed_model: Option<String>,

    /// Endpoint URL of the remote embedding service.
    #[arg(long)]
    pub embed_endpoint: Option<String>,

    /// Environment variable holding the bearer token for the remote service.
    #[arg(long)]
    pub embed_auth_env: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct SmoothingArgs {
    /// Apply graph-neighbor smoothing to the node embeddings.
    #[arg(long)]
    pub smooth: bool,

    /// Weight kept by each node's own vector when smoothing, in (0, 1].
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,

    /// Smoothing passes.
    #[arg(long, default_value_t = 1)]
    pub passes: usize,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Corpus manifest (JSON).
    #[arg(long)]
    pub manifest: PathBuf,

    /// Index directory to create or replace.
    #[arg(long)]
    pub out: PathBuf,

    /// How documents are cut into graph nodes.
    #[arg(long, value_enum, default_value_t = ModeArg::StructuredChunks)]
    pub mode: ModeArg,

    /// Word limit per chunk (vanilla) or before a section is split.
    #[arg(long, default_value_t = 300)]
    pub max_words: usize,

    #[command(flatten)]
    pub smoothing: SmoothingArgs,

    /// BM25 term-frequency saturation.
    #[arg(long, default_value_t = 1.5)]
    pub k1: f64,

    /// BM25 length normalization.
    #[arg(long, default_value_t = 0.75)]
    pub b: f64,

    /// Stem tokens (English Snowball) in the BM25 index.
    #[arg(long)]
    pub stem: bool,

    /// Drop English stopwords in the BM25 index.
    #[arg(long)]
    pub stopwords: bool,

    #[command(flatten)]
    pub embedder: EmbedderArgs,

    /// Build the index even if some documents fail to parse.
    #[arg(long)]
    pub allow_partial: bool,

    /// Print the index manifest and ingest report as JSON.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    /// Index directory to update.
    #[arg(long)]
    pub index: PathBuf,

    #[command(flatten)]
    pub smoothing: SmoothingArgs,

    #[command(flatten)]
    pub embedder: EmbedderArgs,

    /// Print the updated index manifest as JSON.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    /// Index directory.
    #[arg(long)]
    pub index: PathBuf,

    /// Pipeline configuration (JSON, PipelineConfig fields).
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Number of results.
    #[arg(long)]
    pub k: Option<usize>,

    /// Query text.
    #[arg(long)]
    pub text: String,

    /// BM25 candidate count.
    #[arg(long)]
    pub prefilter_n: Option<usize>,

    /// Fuse sparse and dense rankings with reciprocal rank fusion.
    #[arg(long)]
    pub rrf: bool,

    /// Expand the top results with their graph neighbors.
    #[arg(long)]
    pub expand: bool,

    /// Print the full result, including the stage trace, as JSON.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum QaBackendArg {
    /// Deterministic template generator.
    Offline,
    /// Remote text-generation service.
    Remote,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Corpus manifest (JSON).
    #[arg(long)]
    pub manifest: PathBuf,

    /// Number of chunks to sample (one pair each).
    #[arg(long, default_value_t = 1000)]
    pub n: usize,

    /// Sampling seed; equal seeds give equal datasets.
    #[arg(long, default_value_t = 7)]
    pub seed: u64,

    #[arg(long, value_enum, default_value_t = QaBackendArg::Offline)]
    pub backend: QaBackendArg,

    /// Output JSONL; metadata goes to `<out>.meta.json`.
    #[arg(long)]
    pub out: PathBuf,

    /// Remote generation endpoint.
    #[arg(long)]
    pub endpoint: Option<String>,

    /// Environment variable holding the bearer token for the remote endpoint.
    #[arg(long)]
    pub auth_env: Option<String>,

    /// Concurrent remote requests.
    #[arg(long, default_value_t = 4)]
    pub max_in_flight: usize,

    /// Whitespace tokens per flat chunk.
    #[arg(long, default_value_t = 400)]
    pub chunk_max_tokens: usize,

    /// Minimum words per eligible chunk.
    #[arg(long, default_value_t = 40)]
    pub min_words: usize,

    /// Minimum characters for a string to count as a word.
    #[arg(long, default_value_t = 2)]
    pub min_word_chars: usize,

    /// Minimum modal verbs per eligible chunk.
    #[arg(long, default_value_t = 1)]
    pub min_modals: usize,

    /// Print the dataset metadata as JSON.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Question/answer dataset (JSONL).
    #[arg(long)]
    pub dataset: PathBuf,

    /// Comma-separated index directories, at most one per mode.
    #[arg(long, value_delimiter = ',', required = true)]
    pub indexes: Vec<PathBuf>,

    /// Retriever configurations (JSON list); defaults to the built-in eight.
    #[arg(long)]
    pub configs: Option<PathBuf>,

    /// Comma-separated cutoffs.
    #[arg(long, value_delimiter = ',', default_value = "4,8,16")]
    pub ks: Vec<usize>,

    /// Report directory.
    #[arg(long)]
    pub out: PathBuf,

    /// Fraction of a witness that must appear contiguously in a result.
    #[arg(long, default_value_t = 0.75)]
    pub threshold: f64,

    /// Exit non-zero if any cell fails.
    #[arg(long)]
    pub strict: bool,

    /// Record per-query wall-clock times (reports are then not reproducible).
    #[arg(long)]
    pub timing: bool,

    /// Print the summary rows as JSON.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct FixtureArgs {
    /// Directory to write `manifest.json` and `docs/` into.
    #[arg(long)]
    pub out: PathBuf,

    /// Number of documents to generate.
    #[arg(long, default_value_t = normgraph::fixture::DEFAULT_DOCUMENTS)]
    pub documents: usize,

    /// Generator seed.
    #[arg(long, default_value_t = normgraph::fixture::DEFAULT_SEED)]
    pub seed: u64,
}
