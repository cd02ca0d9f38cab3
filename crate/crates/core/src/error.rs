use std::path::PathBuf;

use crate::model::NodeId;

/// Errors raised by graph construction, indexing and retrieval.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("duplicate node id: {0}")]
    DuplicateNode(NodeId),

    #[error("unknown node id: {0}")]
    UnknownNode(NodeId),

    #[error("node {child} already has parent {existing}")]
    SecondParent { child: NodeId, existing: NodeId },

    #[error("self-loop on {0}")]
    SelfLoop(NodeId),

    #[error("graph failed validation: {0:?}")]
    InvalidGraph(Vec<crate::model::Violation>),

    #[error("document {0}: no section headings found")]
    EmptyDocument(String),

    #[error("document {doc_id}: duplicate section code {code}")]
    DuplicateSection { doc_id: String, code: String },

    #[error("invalid section code: {0:?}")]
    InvalidSectionCode(String),

    #[error("invalid manifest: {0}")]
    Manifest(String),

    #[error("no documents could be ingested ({0} failed)")]
    NothingIngested(usize),

    #[error("{failed} document(s) failed to ingest, first: {first}")]
    DocumentsFailed { failed: usize, first: String },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("embedding request for {context} failed: {message}")]
    Embedder { context: String, message: String },

    #[error("inconsistent indexes: {0}")]
    Inconsistent(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed index file {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("no index at {path}: {message}")]
    MissingIndex { path: PathBuf, message: String },

    #[error("index {path} has format version {found}, this build reads version {supported}")]
    VersionMismatch {
        path: PathBuf,
        found: u32,
        supported: u32,
    },

    #[error("index {path} is stale: {message}")]
    StaleIndex { path: PathBuf, message: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
    let path = path.into();
    move |source| Error::Io { path, source }
}
