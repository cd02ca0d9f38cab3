//! Graph-structured retrieval and evaluation for hierarchical, heavily
//! cross-referenced normative documents (standards, regulations).
//!
//! The crate turns pre-extracted document text into an information graph of
//! documents, sections and chunks linked by parthood and citations
//! ([`ingest`], [`model`]), indexes it with BM25 ([`sparse`]) and dense,
//! optionally graph-smoothed embeddings ([`embed`]), answers queries through
//! a configurable hybrid pipeline ([`retrieval`]), and scores retriever
//! configurations against synthesized question/answer pairs ([`qa`],
//! [`eval`]). [`store`] reads and writes index directories.

pub mod embed;
pub mod error;
pub mod eval;
pub mod fixture;
pub mod ingest;
pub mod model;
pub mod qa;
pub mod retrieval;
pub mod sparse;
pub mod store;
pub mod tokenize;

pub use error::{Error, Result};
