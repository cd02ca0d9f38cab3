//! Query-time pipeline: BM25 prefilter, dense re-ranking, reciprocal rank
//! fusion and graph expansion with a hub-penalised neighbor score.
//!
//! Ties are broken the same way at every stage: score descending, then the
//! better prior rank, then canonical node order.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::embed::{cosine_similarity, Embedder, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::model::InfoGraph;
use crate::sparse::SparseIndex;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredNode {
    /// Canonical node ordinal.
    pub node: usize,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Sparse,
    Dense,
    Fused,
    Expanded,
}

/// Ordered candidates. Scores are non-increasing except in expanded lists,
/// where appended neighbors carry their own (incommensurate) scores after
/// the seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub entries: Vec<ScoredNode>,
    pub provenance: Provenance,
}

impl RankedList {
    pub fn new(entries: Vec<ScoredNode>, provenance: Provenance) -> Self {
        debug_assert!({
            let mut seen = HashSet::new();
            entries.iter().all(|e| seen.insert(e.node))
        });
        RankedList {
            entries,
            provenance,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn nodes(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.node).collect()
    }

    pub fn truncated(&self, n: usize) -> RankedList {
        RankedList {
            entries: self.entries.iter().take(n).copied().collect(),
            provenance: self.provenance,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionConfig {
    pub k: f64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig { k: 60.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExpanderConfig {
    /// Weight of seed connectivity (each adjacent seed's query similarity).
    pub alpha: f64,
    /// Weight of the neighbor's own query similarity.
    pub beta: f64,
    /// Weight of the `ln(1 + degree)` hub penalty.
    pub gamma: f64,
    pub max_neighbors: usize,
    /// Keep seeds ahead of expanded neighbors; otherwise merge by score.
    pub include_seeds: bool,
    /// How many top results act as seeds. Defaults to half of `k_final`,
    /// rounded up, so that expansion can contribute to the final list.
    pub seeds: Option<usize>,
}

impl Default for ExpanderConfig {
    fn default() -> Self {
        ExpanderConfig {
            alpha: 1.0,
            beta: 1.0,
            gamma: 0.5,
            max_neighbors: 20,
            include_seeds: true,
            seeds: None,
        }
    }
}

impl ExpanderConfig {
    pub fn check(&self) -> Result<()> {
        for (name, w) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
        ] {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::Config(format!(
                    "expander {name} must be finite and >= 0"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub prefilter_n: usize,
    pub dense_top_m: usize,
    pub use_rrf: bool,
    pub use_expansion: bool,
    pub fusion: FusionConfig,
    pub expander: ExpanderConfig,
    pub k_final: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            prefilter_n: 100,
            dense_top_m: 50,
            use_rrf: false,
            use_expansion: false,
            fusion: FusionConfig::default(),
            expander: ExpanderConfig::default(),
            k_final: 8,
        }
    }
}

impl PipelineConfig {
    pub fn check(&self) -> Result<()> {
        if self.k_final == 0
            || self.k_final > self.dense_top_m
            || self.dense_top_m > self.prefilter_n
        {
            return Err(Error::Config(format!(
                "need 1 <= k_final ({}) <= dense_top_m ({}) <= prefilter_n ({})",
                self.k_final, self.dense_top_m, self.prefilter_n
            )));
        }
        if !(self.fusion.k > 0.0) {
            return Err(Error::Config("fusion k must be positive".into()));
        }
        self.expander.check()
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k_final = k;
        self.dense_top_m = self.dense_top_m.max(k);
        self.prefilter_n = self.prefilter_n.max(self.dense_top_m);
        self
    }
}

/// Scores candidates by cosine to the query and keeps the top `m`; ties keep
/// candidate order.
pub fn dense_rerank(
    candidates: &RankedList,
    query_vec: &[f32],
    matrix: &EmbeddingMatrix,
    m: usize,
) -> Result<RankedList> {
    if query_vec.len() != matrix.dim() {
        return Err(Error::DimensionMismatch {
            expected: matrix.dim(),
            actual: query_vec.len(),
        });
    }
    let mut scored = candidates
        .entries
        .iter()
        .map(|c| {
            Ok(ScoredNode {
                node: c.node,
                score: matrix.cosine_to(c.node, query_vec)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    // stable: equal scores keep candidate order
    scored.sort_by(|a, b| b.score.total_cmp(&a.score));
    scored.truncate(m);
    Ok(RankedList::new(scored, Provenance::Dense))
}

/// Reciprocal rank fusion: `Σ 1 / (k + rank)` over the lists containing a
/// node, with 1-based ranks.
pub fn rrf_fuse(lists: &[&RankedList], config: &FusionConfig) -> RankedList {
    // node -> (score, best rank)
    let mut acc: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for list in lists {
        for (pos, e) in list.entries.iter().enumerate() {
            let rank = pos + 1;
            let slot = acc.entry(e.node).or_insert((0.0, usize::MAX));
            slot.0 += 1.0 / (config.k + rank as f64);
            slot.1 = slot.1.min(rank);
        }
    }
    let mut fused: Vec<(usize, f64, usize)> =
        acc.into_iter().map(|(n, (s, r))| (n, s, r)).collect();
    fused.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.2.cmp(&b.2)).then(a.0.cmp(&b.0)));
    RankedList::new(
        fused
            .into_iter()
            .map(|(node, score, _)| ScoredNode { node, score })
            .collect(),
        Provenance::Fused,
    )
}

/// Score of one expansion candidate given the seeds' query similarities.
pub fn neighbor_score(
    config: &ExpanderConfig,
    seed_similarity_sum: f64,
    own_similarity: f64,
    degree: usize,
) -> f64 {
    config.alpha * seed_similarity_sum + config.beta * own_similarity
        - config.gamma * (1.0 + degree as f64).ln()
}

/// Expands seeds with their graph neighbors, scoring each neighbor `n` as
/// `alpha·Σ_{s adjacent to n} cos(s, q) + beta·cos(n, q) − gamma·ln(1 + deg n)`.
pub fn expand_and_rerank(
    seeds: &RankedList,
    graph: &InfoGraph,
    matrix: &EmbeddingMatrix,
    query_vec: &[f32],
    config: &ExpanderConfig,
) -> Result<RankedList> {
    let seed_set: HashSet<usize> = seeds.entries.iter().map(|e| e.node).collect();
    let mut connectivity: BTreeMap<usize, f64> = BTreeMap::new();
    for s in &seeds.entries {
        let sim = cosine_similarity(matrix.row(s.node), query_vec)?;
        for &(n, _) in graph.neighbor_relations(s.node) {
            if !seed_set.contains(&n) {
                *connectivity.entry(n).or_default() += sim;
            }
        }
    }
    let mut neighbors = connectivity
        .into_iter()
        .map(|(n, seed_sum)| {
            let own = cosine_similarity(matrix.row(n), query_vec)?;
            Ok(ScoredNode {
                node: n,
                score: neighbor_score(config, seed_sum, own, graph.degree(n)),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    neighbors.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.node.cmp(&b.node)));
    neighbors.truncate(config.max_neighbors);

    let entries = if config.include_seeds {
        let mut out = seeds.entries.clone();
        out.extend(neighbors);
        out
    } else {
        // seeds first on equal score: they carry a prior rank, neighbors do not
        let mut tagged: Vec<(ScoredNode, usize)> = seeds
            .entries
            .iter()
            .enumerate()
            .map(|(i, e)| (*e, i))
            .chain(neighbors.into_iter().map(|e| (e, usize::MAX)))
            .collect();
        tagged.sort_by(|a, b| {
            b.0.score
                .total_cmp(&a.0.score)
                .then(a.1.cmp(&b.1))
                .then(a.0.node.cmp(&b.0.node))
        });
        tagged.into_iter().map(|(e, _)| e).collect()
    };
    Ok(RankedList::new(entries, Provenance::Expanded))
}

/// The three mutually consistent indexes of one index build, plus the
/// embedder used for queries.
pub struct IndexSet {
    pub graph: InfoGraph,
    pub sparse: SparseIndex,
    pub embeddings: EmbeddingMatrix,
    pub embedder: Embedder,
}

impl IndexSet {
    pub fn new(
        graph: InfoGraph,
        sparse: SparseIndex,
        embeddings: EmbeddingMatrix,
        embedder: Embedder,
    ) -> Result<Self> {
        let set = IndexSet {
            graph,
            sparse,
            embeddings,
            embedder,
        };
        set.check()?;
        Ok(set)
    }

    pub fn check(&self) -> Result<()> {
        let n = self.graph.len();
        if self.sparse.node_count() != n {
            return Err(Error::Inconsistent(format!(
                "graph has {n} nodes, sparse index {}",
                self.sparse.node_count()
            )));
        }
        if self.embeddings.len() != n {
            return Err(Error::Inconsistent(format!(
                "graph has {n} nodes, embedding matrix {} rows",
                self.embeddings.len()
            )));
        }
        if self.embeddings.dim() != self.embedder.dim() {
            return Err(Error::Inconsistent(format!(
                "embedding matrix dim {} differs from embedder dim {}",
                self.embeddings.dim(),
                self.embedder.dim()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub sparse: RankedList,
    pub dense: Option<RankedList>,
    pub fused: Option<RankedList>,
    pub expanded: Option<RankedList>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOutput {
    pub results: RankedList,
    pub trace: Trace,
}

pub fn run_pipeline(
    query_text: &str,
    indexes: &IndexSet,
    config: &PipelineConfig,
) -> Result<PipelineOutput> {
    config.check()?;
    let sparse = indexes.sparse.prefilter(query_text, config.prefilter_n);
    let mut trace = Trace {
        sparse: sparse.clone(),
        dense: None,
        fused: None,
        expanded: None,
    };
    if sparse.is_empty() {
        return Ok(PipelineOutput {
            results: RankedList::new(Vec::new(), Provenance::Sparse),
            trace,
        });
    }
    let query_vec = indexes.embedder.embed_text(query_text)?;
    let dense = dense_rerank(&sparse, &query_vec, &indexes.embeddings, config.dense_top_m)?;
    trace.dense = Some(dense.clone());

    let mut current = if config.use_rrf {
        let fused = rrf_fuse(&[&sparse, &dense], &config.fusion);
        trace.fused = Some(fused.clone());
        fused
    } else {
        dense
    };

    if config.use_expansion {
        let n_seeds = config
            .expander
            .seeds
            .unwrap_or(config.k_final.div_ceil(2))
            .max(1);
        let seeds = current.truncated(n_seeds);
        let expanded = expand_and_rerank(
            &seeds,
            &indexes.graph,
            &indexes.embeddings,
            &query_vec,
            &config.expander,
        )?;
        trace.expanded = Some(expanded.clone());
        current = expanded;
    }

    Ok(PipelineOutput {
        results: current.truncated(config.k_final),
        trace,
    })
}

/// Maps ordinals to their rank (1-based) in a list.
pub fn rank_map(list: &RankedList) -> HashMap<usize, usize> {
    list.entries
        .iter()
        .enumerate()
        .map(|(i, e)| (e.node, i + 1))
        .collect()
}
