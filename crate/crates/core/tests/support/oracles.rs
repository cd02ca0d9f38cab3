//! Straightforward reference implementations used to check the library.
//! Each one follows the textbook definition with no shared code paths.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

/// BM25 of every document for `query`, documents and query given as
/// already tokenized word lists.
pub fn bm25_brute(docs: &[Vec<String>], query: &[String], k1: f64, b: f64) -> Vec<f64> {
    let n = docs.len() as f64;
    let avgdl = docs.iter().map(|d| d.len() as f64).sum::<f64>() / n;
    docs.iter()
        .map(|d| {
            let mut score = 0.0;
            for t in query {
                let tf = d.iter().filter(|w| *w == t).count() as f64;
                if tf == 0.0 {
                    continue;
                }
                let df = docs.iter().filter(|x| x.contains(t)).count() as f64;
                let idf = ((n - df + 0.5) / (df + 0.5) + 1.0).ln();
                let norm = if avgdl > 0.0 {
                    d.len() as f64 / avgdl
                } else {
                    0.0
                };
                score += idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * norm));
            }
            score
        })
        .collect()
}

/// `Σ_lists 1 / (k + rank)` for every node appearing in some list.
pub fn rrf_direct(lists: &[Vec<usize>], k: f64) -> BTreeMap<usize, f64> {
    let mut out = BTreeMap::new();
    let all: BTreeSet<usize> = lists.iter().flatten().copied().collect();
    for node in all {
        let mut s = 0.0;
        for list in lists {
            if let Some(pos) = list.iter().position(|&x| x == node) {
                s += 1.0 / (k + (pos + 1) as f64);
            }
        }
        out.insert(node, s);
    }
    out
}

/// Neighbor sets from raw edge lists: parent, children, siblings (same
/// parent), cited and citing nodes, never the node itself.
pub fn naive_neighbors(
    n: usize,
    parthood: &[(usize, usize)],
    citations: &[(usize, usize)],
) -> Vec<BTreeSet<usize>> {
    let mut out = vec![BTreeSet::new(); n];
    for &(c, p) in parthood {
        out[c].insert(p);
        out[p].insert(c);
        for &(c2, p2) in parthood {
            if p2 == p && c2 != c {
                out[c].insert(c2);
            }
        }
    }
    for &(a, b) in citations {
        out[a].insert(b);
        out[b].insert(a);
    }
    for (i, set) in out.iter_mut().enumerate() {
        set.remove(&i);
    }
    out
}

/// Ancestors by repeatedly following the parent edge list.
pub fn naive_ancestors(node: usize, parthood: &[(usize, usize)]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut cur = node;
    while let Some(&(_, p)) = parthood.iter().find(|&&(c, _)| c == cur) {
        out.push(p);
        cur = p;
    }
    out
}

pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let dot: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| f64::from(*x) * f64::from(*y))
        .sum();
    let na: f64 = a.iter().map(|x| f64::from(*x).powi(2)).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| f64::from(*x).powi(2)).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Expansion score of every non-seed node adjacent to at least one seed.
pub fn expander_direct(
    seeds: &[usize],
    neighbors: &[BTreeSet<usize>],
    vectors: &[Vec<f32>],
    query: &[f32],
    (alpha, beta, gamma): (f64, f64, f64),
) -> BTreeMap<usize, f64> {
    let mut out = BTreeMap::new();
    for n in 0..neighbors.len() {
        if seeds.contains(&n) || !seeds.iter().any(|s| neighbors[*s].contains(&n)) {
            continue;
        }
        let seed_term: f64 = seeds
            .iter()
            .filter(|s| neighbors[**s].contains(&n))
            .map(|s| cosine(&vectors[*s], query))
            .sum();
        let score = alpha * seed_term + beta * cosine(&vectors[n], query)
            - gamma * (1.0 + neighbors[n].len() as f64).ln();
        out.insert(n, score);
    }
    out
}

fn collapse(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Enumerates every substring of the golden text at least
/// `ceil(threshold · |golden|)` characters long and looks for it in the
/// retrieved text.
pub fn substring_match_brute(golden: &str, retrieved: &str, threshold: f64) -> bool {
    let g: Vec<char> = collapse(golden).chars().collect();
    let r = collapse(retrieved);
    let need = (threshold * g.len() as f64).ceil() as usize;
    for len in (need..=g.len()).rev() {
        for start in 0..=g.len() - len {
            let sub: String = g[start..start + len].iter().collect();
            if r.contains(&sub) {
                return true;
            }
        }
    }
    false
}

pub fn recall_naive(relevant: &[bool], r: usize) -> f64 {
    relevant.iter().filter(|&&x| x).count() as f64 / r as f64
}

pub fn ap_naive(relevant: &[bool], r: usize, k: usize) -> f64 {
    let mut total = 0.0;
    for i in 1..=relevant.len() {
        if relevant[i - 1] {
            let hits = relevant[..i].iter().filter(|&&x| x).count();
            total += hits as f64 / i as f64;
        }
    }
    total / r.min(k) as f64
}

pub fn rr_naive(relevant: &[bool]) -> f64 {
    for (i, &x) in relevant.iter().enumerate() {
        if x {
            return 1.0 / (i + 1) as f64;
        }
    }
    0.0
}
