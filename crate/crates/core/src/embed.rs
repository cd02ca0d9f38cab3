//! Dense node embeddings, graph-neighbor smoothing and the binary vector
//! store.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{io_err, Error, Result};
use crate::model::{InfoGraph, Relation};
use crate::tokenize::tokenize;

pub const DEFAULT_DIM: usize = 512;
const MAGIC: &[u8; 4] = b"NGEM";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    DeterministicLocal,
    RemoteHttp,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbedderSpec {
    pub backend: Backend,
    pub model_name: String,
    pub dim: usize,
    /// URL receiving `POST {"model", "text"}` for the remote backend.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    /// Environment variable holding a bearer token for the remote backend.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auth_env: Option<String>,
}

impl EmbedderSpec {
    pub fn local(dim: usize) -> Self {
        EmbedderSpec {
            backend: Backend::DeterministicLocal,
            model_name: format!("fnv1a-hash-{dim}"),
            dim,
            endpoint: None,
            auth_env: None,
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Config("embedding dim must be positive".into()));
        }
        if self.backend == Backend::RemoteHttp && self.endpoint.is_none() {
            return Err(Error::Config("remote embedder requires an endpoint".into()));
        }
        Ok(())
    }
}

impl Default for EmbedderSpec {
    fn default() -> Self {
        EmbedderSpec::local(DEFAULT_DIM)
    }
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Signed feature hashing of the shared token stream, L2-normalized.
/// Empty input gives the zero vector.
pub fn hash_embedding(text: &str, dim: usize) -> Vec<f32> {
    let mut counts = vec![0i64; dim];
    for token in tokenize(text) {
        let h = fnv1a64(token.as_bytes());
        let bucket = (h % dim as u64) as usize;
        counts[bucket] += if h >> 63 == 0 { 1 } else { -1 };
    }
    let norm = counts.iter().map(|&c| (c * c) as f64).sum::<f64>().sqrt();
    if norm == 0.0 {
        return vec![0.0; dim];
    }
    counts.iter().map(|&c| (c as f64 / norm) as f32).collect()
}

#[derive(Serialize)]
struct RemoteRequest<'a> {
    model: &'a str,
    text: &'a str,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RemoteResponse {
    Wrapped { embedding: Vec<f32> },
    Bare(Vec<f32>),
}

#[derive(Clone)]
pub struct Embedder {
    spec: EmbedderSpec,
    agent: Option<ureq::Agent>,
}

impl Embedder {
    pub fn new(spec: EmbedderSpec) -> Result<Self> {
        spec.check()?;
        let agent = (spec.backend == Backend::RemoteHttp).then(|| {
            ureq::Agent::config_builder()
                .timeout_global(Some(Duration::from_secs(60)))
                .build()
                .into()
        });
        Ok(Embedder { spec, agent })
    }

    pub fn spec(&self) -> &EmbedderSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    pub fn embed_text(&self, text: &str) -> Result<Vec<f32>> {
        self.embed_with_context(text, "text")
    }

    fn embed_with_context(&self, text: &str, context: &str) -> Result<Vec<f32>> {
        match self.spec.backend {
            Backend::DeterministicLocal => Ok(hash_embedding(text, self.spec.dim)),
            Backend::RemoteHttp => self.remote(text, context),
        }
    }

    fn remote(&self, text: &str, context: &str) -> Result<Vec<f32>> {
        let fail = |message: String| Error::Embedder {
            context: context.to_string(),
            message,
        };
        let agent = self.agent.as_ref().expect("remote agent");
        let url = self.spec.endpoint.as_deref().expect("checked endpoint");
        let mut req = agent.post(url);
        if let Some(var) = &self.spec.auth_env {
            let token = std::env::var(var).map_err(|_| fail(format!("${var} is not set")))?;
            req = req.header("Authorization", &format!("Bearer {token}"));
        }
        let body = RemoteRequest {
            model: &self.spec.model_name,
            text,
        };
        let mut resp = req.send_json(&body).map_err(|e| fail(e.to_string()))?;
        let parsed: RemoteResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| fail(format!("bad response: {e}")))?;
        let mut v = match parsed {
            RemoteResponse::Wrapped { embedding } => embedding,
            RemoteResponse::Bare(v) => v,
        };
        if v.len() != self.spec.dim {
            return Err(fail(format!(
                "expected {} values, got {}",
                self.spec.dim,
                v.len()
            )));
        }
        normalize(&mut v);
        Ok(v)
    }
}

fn norm(v: &[f32]) -> f64 {
    v.iter()
        .map(|&x| f64::from(x) * f64::from(x))
        .sum::<f64>()
        .sqrt()
}

/// Scales a non-zero vector to unit length; zero vectors are left alone.
pub fn normalize(v: &mut [f32]) {
    let n = norm(v);
    if n > 0.0 {
        for x in v.iter_mut() {
            *x = (f64::from(*x) / n) as f32;
        }
    }
}

/// Cosine similarity in f64; zero when either vector is zero.
pub fn cosine_similarity(a: &[f32], b: &[f32]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    let (mut dot, mut na, mut nb) = (0.0f64, 0.0f64, 0.0f64);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (f64::from(x), f64::from(y));
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}

/// One row per graph node, in canonical node order.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    dim: usize,
    data: Vec<f32>,
    norms: Vec<f32>,
}

impl EmbeddingMatrix {
    pub fn from_rows(dim: usize, rows: Vec<Vec<f32>>) -> Result<Self> {
        let mut data = Vec::with_capacity(dim * rows.len());
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: row.len(),
                });
            }
            data.extend(row);
        }
        Ok(Self::from_flat(dim, data))
    }

    fn from_flat(dim: usize, data: Vec<f32>) -> Self {
        let norms = if dim == 0 {
            Vec::new()
        } else {
            data.chunks(dim).map(|r| norm(r) as f32).collect()
        };
        EmbeddingMatrix { dim, data, norms }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.norms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.norms.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks(self.dim.max(1))
    }

    pub fn norm(&self, i: usize) -> f32 {
        self.norms[i]
    }

    /// Cosine between row `i` and a query vector.
    pub fn cosine_to(&self, i: usize, query: &[f32]) -> Result<f64> {
        cosine_similarity(self.row(i), query)
    }

    pub fn write_bin(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::with_capacity(12 + 4 * self.data.len());
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&(self.dim as u32).to_le_bytes());
        buf.extend_from_slice(&(self.len() as u32).to_le_bytes());
        for x in &self.data {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        let mut f = fs::File::create(path).map_err(io_err(path))?;
        f.write_all(&buf).map_err(io_err(path))
    }

    pub fn read_bin(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(io_err(path))?;
        let bad = |message: &str| Error::Format {
            path: path.to_path_buf(),
            message: message.to_string(),
        };
        if bytes.len() < 12 || &bytes[..4] != MAGIC {
            return Err(bad("missing NGEM header"));
        }
        let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize;
        let (dim, count) = (word(4), word(8));
        if bytes.len() != 12 + 4 * dim * count {
            return Err(bad("payload length does not match header"));
        }
        let data = bytes[12..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Self::from_flat(dim, data))
    }
}

/// Embeds `title + "\n" + body` of every node in canonical order.
pub fn embed_graph(embedder: &Embedder, graph: &InfoGraph) -> Result<EmbeddingMatrix> {
    let rows: Vec<Result<Vec<f32>>> = graph
        .nodes()
        .par_iter()
        .map(|u| embedder.embed_with_context(&u.text(), u.id.as_str()))
        .collect();
    let total = rows.len();
    let mut out = Vec::with_capacity(total);
    for (done, row) in rows.into_iter().enumerate() {
        match row {
            Ok(v) => out.push(v),
            Err(Error::Embedder { context, message }) => {
                return Err(Error::Embedder {
                    context,
                    message: format!("{message} (after {done} of {total} nodes)"),
                })
            }
            Err(e) => return Err(e),
        }
    }
    EmbeddingMatrix::from_rows(embedder.dim(), out)
}

/// Per-relation neighbor weights used when averaging. A neighbor related in
/// several ways takes its largest applicable weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeighborWeights {
    pub parent: f64,
    pub child: f64,
    pub sibling: f64,
    pub citation: f64,
}

impl Default for NeighborWeights {
    fn default() -> Self {
        NeighborWeights {
            parent: 1.0,
            child: 1.0,
            sibling: 1.0,
            citation: 1.0,
        }
    }
}

impl NeighborWeights {
    fn weight(&self, rel: Relation) -> f64 {
        let mut w: f64 = 0.0;
        if rel.contains(Relation::PARENT) {
            w = w.max(self.parent);
        }
        if rel.contains(Relation::CHILD) {
            w = w.max(self.child);
        }
        if rel.contains(Relation::SIBLING) {
            w = w.max(self.sibling);
        }
        if rel.is_citation() {
            w = w.max(self.citation);
        }
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingConfig {
    /// Weight kept by a node's own vector, in (0, 1].
    pub alpha: f64,
    #[serde(default = "one")]
    pub passes: usize,
    #[serde(default)]
    pub weights: NeighborWeights,
}

fn one() -> usize {
    1
}

impl SmoothingConfig {
    pub fn new(alpha: f64) -> Self {
        SmoothingConfig {
            alpha,
            passes: 1,
            weights: NeighborWeights::default(),
        }
    }

    pub fn check(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Config(format!(
                "smoothing alpha must be in (0, 1], got {}",
                self.alpha
            )));
        }
        if self.passes == 0 {
            return Err(Error::Config("smoothing passes must be at least 1".into()));
        }
        let w = self.weights;
        if [w.parent, w.child, w.sibling, w.citation]
            .iter()
            .any(|x| !x.is_finite() || *x < 0.0)
        {
            return Err(Error::Config(
                "neighbor weights must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Replaces every node vector by `alpha * v + (1 - alpha) * mean(neighbors)`,
/// all nodes updated from the previous pass's values, then rescales non-zero
/// rows to unit length. Nodes without neighbors are unchanged.
pub fn smooth(
    matrix: &EmbeddingMatrix,
    graph: &InfoGraph,
    config: &SmoothingConfig,
) -> Result<EmbeddingMatrix> {
    config.check()?;
    if matrix.len() != graph.len() {
        return Err(Error::DimensionMismatch {
            expected: graph.len(),
            actual: matrix.len(),
        });
    }
    let dim = matrix.dim();
    let alpha = config.alpha;
    // summing neighbors in id order keeps results bit-identical under any
    // node ordering
    let order: Vec<Vec<(usize, f64)>> = (0..graph.len())
        .map(|i| {
            let mut list: Vec<(usize, f64)> = graph
                .neighbor_relations(i)
                .iter()
                .map(|&(n, rel)| (n, config.weights.weight(rel)))
                .filter(|&(_, w)| w != 0.0)
                .collect();
            list.sort_by(|a, b| graph.node(a.0).id.cmp(&graph.node(b.0).id));
            list
        })
        .collect();
    let mut current = matrix.clone();
    for _ in 0..config.passes {
        let rows: Vec<Vec<f32>> = (0..current.len())
            .into_par_iter()
            .map(|i| {
                let own = current.row(i);
                let mut acc = vec![0.0f64; dim];
                let mut total = 0.0f64;
                for &(n, w) in &order[i] {
                    total += w;
                    for (a, &x) in acc.iter_mut().zip(current.row(n)) {
                        *a += w * f64::from(x);
                    }
                }
                if total == 0.0 {
                    return own.to_vec();
                }
                let mut out: Vec<f32> = own
                    .iter()
                    .zip(&acc)
                    .map(|(&x, &s)| (alpha * f64::from(x) + (1.0 - alpha) * (s / total)) as f32)
                    .collect();
                normalize(&mut out);
                out
            })
            .collect();
        current = EmbeddingMatrix::from_rows(dim, rows)?;
    }
    Ok(current)
}

/// Sidecar describing how `embeddings.bin` was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingsMeta {
    pub model_name: String,
    pub backend: Backend,
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auth_env: Option<String>,
    pub alpha: Option<f64>,
    pub passes: Option<usize>,
    pub smoothed: bool,
}

impl EmbeddingsMeta {
    pub fn new(spec: &EmbedderSpec, smoothing: Option<&SmoothingConfig>) -> Self {
        EmbeddingsMeta {
            model_name: spec.model_name.clone(),
            backend: spec.backend,
            dim: spec.dim,
            endpoint: spec.endpoint.clone(),
            auth_env: spec.auth_env.clone(),
            alpha: smoothing.map(|s| s.alpha),
            passes: smoothing.map(|s| s.passes),
            smoothed: smoothing.is_some(),
        }
    }

    pub fn embedder_spec(&self) -> EmbedderSpec {
        EmbedderSpec {
            backend: self.backend,
            model_name: self.model_name.clone(),
            dim: self.dim,
            endpoint: self.endpoint.clone(),
            auth_env: self.auth_env.clone(),
        }
    }
}
