//! The information graph: homogeneous units (documents, sections, chunks)
//! linked by parthood (child to parent, at most one parent each) and
//! directed, many-to-many citations.
//!
//! A [`GraphBuilder`] is the mutable construction-time form. Freezing it
//! validates the structure and precomputes the adjacency used by every
//! query-time consumer, yielding an immutable [`InfoGraph`].

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Stable node identifier.
///
/// Rendered as `<doc_id>` for documents, `<doc_id>#<code>` for sections and
/// `<parent>/<ordinal>` for chunks split out of a parent unit.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(String);

impl NodeId {
    pub fn new(raw: impl Into<String>) -> Self {
        NodeId(raw.into())
    }

    pub fn document(doc_id: &str) -> Self {
        NodeId(doc_id.to_string())
    }

    pub fn section(doc_id: &str, code: &str) -> Self {
        NodeId(format!("{doc_id}#{code}"))
    }

    pub fn chunk(parent: &NodeId, ordinal: usize) -> Self {
        NodeId(format!("{}/{}", parent.0, ordinal))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        NodeId(s.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Document,
    Section,
    Chunk,
}

/// A titled, bodied node of the graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfoUnit {
    pub id: NodeId,
    pub doc_id: String,
    /// Dotted code of the section this unit belongs to. Absent for documents
    /// and for chunks of unstructured (vanilla) documents.
    pub section_code: Option<String>,
    pub title: String,
    pub body: String,
    pub kind: NodeKind,
    #[serde(default)]
    pub is_tabular: bool,
}

impl InfoUnit {
    pub fn document(doc_id: &str, title: &str) -> Self {
        InfoUnit {
            id: NodeId::document(doc_id),
            doc_id: doc_id.to_string(),
            section_code: None,
            title: title.to_string(),
            body: String::new(),
            kind: NodeKind::Document,
            is_tabular: false,
        }
    }

    /// Text used for embedding, sparse indexing and matching.
    pub fn text(&self) -> String {
        let mut s = String::with_capacity(self.title.len() + self.body.len() + 1);
        s.push_str(&self.title);
        s.push('\n');
        s.push_str(&self.body);
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeKind {
    Parthood,
    Citation,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub from: NodeId,
    pub to: NodeId,
    pub kind: EdgeKind,
}

/// A structural problem reported by [`GraphBuilder::validate`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "violation", rename_all = "snake_case")]
pub enum Violation {
    DuplicateNode { id: NodeId },
    MultipleParents { child: NodeId, parents: Vec<NodeId> },
    ParthoodCycle { nodes: Vec<NodeId> },
    ParthoodSelfLoop { node: NodeId },
    DanglingEdge { edge: Edge, missing: NodeId },
}

/// Relations through which a node is a neighbor of another. A neighbor may
/// be related in more than one way (e.g. a child that also cites its parent).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Relation(u8);

impl Relation {
    pub const PARENT: Relation = Relation(1);
    pub const CHILD: Relation = Relation(2);
    pub const SIBLING: Relation = Relation(4);
    pub const CITES: Relation = Relation(8);
    pub const CITED_BY: Relation = Relation(16);

    pub fn contains(self, other: Relation) -> bool {
        self.0 & other.0 == other.0 && other.0 != 0
    }

    pub fn is_structural(self) -> bool {
        self.0 & (Self::PARENT.0 | Self::CHILD.0 | Self::SIBLING.0) != 0
    }

    pub fn is_citation(self) -> bool {
        self.0 & (Self::CITES.0 | Self::CITED_BY.0) != 0
    }
}

impl std::ops::BitOr for Relation {
    type Output = Relation;
    fn bitor(self, rhs: Relation) -> Relation {
        Relation(self.0 | rhs.0)
    }
}

impl std::ops::BitOrAssign for Relation {
    fn bitor_assign(&mut self, rhs: Relation) {
        self.0 |= rhs.0;
    }
}

/// On-disk form of the graph (`graph.json`). Node order is canonical: it is
/// the row order of the embedding matrix and the ordinal space of the
/// sparse index.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GraphFile {
    pub nodes: Vec<InfoUnit>,
    pub parthood: Vec<(NodeId, NodeId)>,
    pub citations: Vec<(NodeId, NodeId)>,
    pub unresolved: Vec<(NodeId, String)>,
}

/// Mutable, construction-time graph.
#[derive(Debug, Clone, Default)]
pub struct GraphBuilder {
    nodes: Vec<InfoUnit>,
    index: HashMap<NodeId, usize>,
    duplicates: Vec<NodeId>,
    // child -> parent edges in insertion order; a loaded file may carry
    // several entries for one child, which validate() reports
    parthood: Vec<(NodeId, NodeId)>,
    parent_of: HashMap<NodeId, NodeId>,
    citations: Vec<(NodeId, NodeId)>,
    citation_set: HashSet<(NodeId, NodeId)>,
    unresolved: Vec<(NodeId, String)>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn add_node(&mut self, unit: InfoUnit) -> Result<NodeId> {
        if self.index.contains_key(&unit.id) {
            return Err(Error::DuplicateNode(unit.id));
        }
        let id = unit.id.clone();
        self.index.insert(id.clone(), self.nodes.len());
        self.nodes.push(unit);
        Ok(id)
    }

    pub fn node(&self, id: &NodeId) -> Option<&InfoUnit> {
        self.index.get(id).map(|&i| &self.nodes[i])
    }

    pub fn node_mut(&mut self, id: &NodeId) -> Option<&mut InfoUnit> {
        self.index.get(id).map(|&i| &mut self.nodes[i])
    }

    pub fn nodes(&self) -> &[InfoUnit] {
        &self.nodes
    }

    pub fn contains(&self, id: &NodeId) -> bool {
        self.index.contains_key(id)
    }

    pub fn parent(&self, child: &NodeId) -> Option<&NodeId> {
        self.parent_of.get(child)
    }

    pub fn add_parthood(&mut self, child: &NodeId, parent: &NodeId) -> Result<()> {
        for id in [child, parent] {
            if !self.contains(id) {
                return Err(Error::UnknownNode(id.clone()));
            }
        }
        if child == parent {
            return Err(Error::SelfLoop(child.clone()));
        }
        if let Some(existing) = self.parent_of.get(child) {
            return Err(Error::SecondParent {
                child: child.clone(),
                existing: existing.clone(),
            });
        }
        self.parent_of.insert(child.clone(), parent.clone());
        self.parthood.push((child.clone(), parent.clone()));
        Ok(())
    }

    /// Adds a directed citation. Returns `Ok(false)` when the edge was not
    /// added: self-citations are dropped and repeated edges collapse.
    pub fn add_citation(&mut self, from: &NodeId, to: &NodeId) -> Result<bool> {
        for id in [from, to] {
            if !self.contains(id) {
                return Err(Error::UnknownNode(id.clone()));
            }
        }
        if from == to {
            log::debug!("dropping self-citation on {from}");
            return Ok(false);
        }
        let key = (from.clone(), to.clone());
        if !self.citation_set.insert(key.clone()) {
            return Ok(false);
        }
        self.citations.push(key);
        Ok(true)
    }

    pub fn record_unresolved(&mut self, source: &NodeId, raw: &str) {
        self.unresolved.push((source.clone(), raw.to_string()));
    }

    pub fn unresolved(&self) -> &[(NodeId, String)] {
        &self.unresolved
    }

    pub fn citation_count(&self) -> usize {
        self.citations.len()
    }

    /// Lenient load: keeps whatever the file says (duplicate nodes, dangling
    /// edges, several parents) so that [`validate`](Self::validate) can
    /// report it.
    pub fn from_file(file: GraphFile) -> Self {
        let mut b = GraphBuilder::new();
        for unit in file.nodes {
            if b.index.contains_key(&unit.id) {
                b.duplicates.push(unit.id.clone());
                continue;
            }
            b.index.insert(unit.id.clone(), b.nodes.len());
            b.nodes.push(unit);
        }
        for (child, parent) in file.parthood {
            b.parent_of
                .entry(child.clone())
                .or_insert_with(|| parent.clone());
            b.parthood.push((child, parent));
        }
        for (from, to) in file.citations {
            if b.citation_set.insert((from.clone(), to.clone())) {
                b.citations.push((from, to));
            }
        }
        b.unresolved = file.unresolved;
        b
    }

    /// Returns every structural violation; empty iff the graph is sound.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out: Vec<Violation> = self
            .duplicates
            .iter()
            .map(|id| Violation::DuplicateNode { id: id.clone() })
            .collect();

        let mut parents: HashMap<&NodeId, Vec<&NodeId>> = HashMap::new();
        for (child, parent) in &self.parthood {
            for end in [child, parent] {
                if !self.contains(end) {
                    out.push(Violation::DanglingEdge {
                        edge: Edge {
                            from: child.clone(),
                            to: parent.clone(),
                            kind: EdgeKind::Parthood,
                        },
                        missing: end.clone(),
                    });
                }
            }
            if child == parent {
                out.push(Violation::ParthoodSelfLoop {
                    node: child.clone(),
                });
            }
            parents.entry(child).or_default().push(parent);
        }
        let mut multi: Vec<_> = parents.iter().filter(|(_, ps)| ps.len() > 1).collect();
        multi.sort_by_key(|(c, _)| self.order_key(c));
        for (child, ps) in multi {
            out.push(Violation::MultipleParents {
                child: (*child).clone(),
                parents: ps.iter().map(|p| (*p).clone()).collect(),
            });
        }

        for (from, to) in &self.citations {
            for end in [from, to] {
                if !self.contains(end) {
                    out.push(Violation::DanglingEdge {
                        edge: Edge {
                            from: from.clone(),
                            to: to.clone(),
                            kind: EdgeKind::Citation,
                        },
                        missing: end.clone(),
                    });
                }
            }
        }

        out.extend(self.parthood_cycles());
        out
    }

    fn order_key(&self, id: &NodeId) -> (usize, NodeId) {
        (
            self.index.get(id).copied().unwrap_or(usize::MAX),
            id.clone(),
        )
    }

    // Iterative three-colour DFS over child -> parent edges between existing
    // nodes; each back edge yields one cycle.
    fn parthood_cycles(&self) -> Vec<Violation> {
        let n = self.nodes.len();
        let mut up: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (child, parent) in &self.parthood {
            if let (Some(&c), Some(&p)) = (self.index.get(child), self.index.get(parent)) {
                if c != p {
                    up[c].push(p);
                }
            }
        }
        let mut colour = vec![0u8; n];
        let mut cycles = Vec::new();
        for start in 0..n {
            if colour[start] != 0 {
                continue;
            }
            let mut stack: Vec<(usize, usize)> = vec![(start, 0)];
            colour[start] = 1;
            while let Some(&mut (v, ref mut next)) = stack.last_mut() {
                if *next < up[v].len() {
                    let w = up[v][*next];
                    *next += 1;
                    match colour[w] {
                        0 => {
                            colour[w] = 1;
                            stack.push((w, 0));
                        }
                        1 => {
                            let pos = stack.iter().position(|&(x, _)| x == w).unwrap_or(0);
                            let nodes = stack[pos..]
                                .iter()
                                .map(|&(x, _)| self.nodes[x].id.clone())
                                .collect();
                            cycles.push(Violation::ParthoodCycle { nodes });
                        }
                        _ => {}
                    }
                } else {
                    colour[v] = 2;
                    stack.pop();
                }
            }
        }
        cycles
    }

    /// Validates and precomputes adjacency.
    pub fn freeze(self) -> Result<InfoGraph> {
        let violations = self.validate();
        if !violations.is_empty() {
            return Err(Error::InvalidGraph(violations));
        }
        Ok(InfoGraph::from_valid(self))
    }
}

/// Frozen, validated graph. All queries are read-only.
#[derive(Debug, Clone)]
pub struct InfoGraph {
    raw: GraphBuilder,
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    cites_out: Vec<Vec<usize>>,
    cites_in: Vec<Vec<usize>>,
    neighbors: Vec<Vec<(usize, Relation)>>,
}

impl InfoGraph {
    fn from_valid(raw: GraphBuilder) -> Self {
        let n = raw.nodes.len();
        let ord = |id: &NodeId| raw.index[id];
        let mut parent = vec![None; n];
        let mut children = vec![Vec::new(); n];
        for (c, p) in &raw.parthood {
            let (c, p) = (ord(c), ord(p));
            parent[c] = Some(p);
            children[p].push(c);
        }
        let mut cites_out = vec![Vec::new(); n];
        let mut cites_in = vec![Vec::new(); n];
        for (f, t) in &raw.citations {
            let (f, t) = (ord(f), ord(t));
            cites_out[f].push(t);
            cites_in[t].push(f);
        }
        for lists in [&mut children, &mut cites_out, &mut cites_in] {
            for l in lists.iter_mut() {
                l.sort_unstable();
                l.dedup();
            }
        }

        let mut neighbors = Vec::with_capacity(n);
        let mut rel: HashMap<usize, Relation> = HashMap::new();
        for v in 0..n {
            rel.clear();
            if let Some(p) = parent[v] {
                *rel.entry(p).or_default() |= Relation::PARENT;
                for &s in &children[p] {
                    *rel.entry(s).or_default() |= Relation::SIBLING;
                }
            }
            for &c in &children[v] {
                *rel.entry(c).or_default() |= Relation::CHILD;
            }
            for &t in &cites_out[v] {
                *rel.entry(t).or_default() |= Relation::CITES;
            }
            for &f in &cites_in[v] {
                *rel.entry(f).or_default() |= Relation::CITED_BY;
            }
            rel.remove(&v);
            let mut list: Vec<(usize, Relation)> = rel.iter().map(|(&k, &r)| (k, r)).collect();
            list.sort_unstable_by_key(|&(k, _)| k);
            neighbors.push(list);
        }

        InfoGraph {
            raw,
            parent,
            children,
            cites_out,
            cites_in,
            neighbors,
        }
    }

    pub fn from_file(file: GraphFile) -> Result<Self> {
        GraphBuilder::from_file(file).freeze()
    }

    pub fn to_file(&self) -> GraphFile {
        let mut parthood: Vec<(usize, usize)> = self
            .parent
            .iter()
            .enumerate()
            .filter_map(|(c, p)| p.map(|p| (c, p)))
            .collect();
        parthood.sort_unstable();
        let mut citations: Vec<(usize, usize)> = self
            .cites_out
            .iter()
            .enumerate()
            .flat_map(|(f, ts)| ts.iter().map(move |&t| (f, t)))
            .collect();
        citations.sort_unstable();
        let id = |i: usize| self.raw.nodes[i].id.clone();
        GraphFile {
            nodes: self.raw.nodes.clone(),
            parthood: parthood.into_iter().map(|(c, p)| (id(c), id(p))).collect(),
            citations: citations.into_iter().map(|(f, t)| (id(f), id(t))).collect(),
            unresolved: self.raw.unresolved.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.raw.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[InfoUnit] {
        &self.raw.nodes
    }

    pub fn node(&self, ordinal: usize) -> &InfoUnit {
        &self.raw.nodes[ordinal]
    }

    pub fn ordinal(&self, id: &NodeId) -> Result<usize> {
        self.raw
            .index
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownNode(id.clone()))
    }

    pub fn get(&self, id: &NodeId) -> Option<&InfoUnit> {
        self.raw.node(id)
    }

    pub fn parent_ordinal(&self, ordinal: usize) -> Option<usize> {
        self.parent[ordinal]
    }

    pub fn children_ordinals(&self, ordinal: usize) -> &[usize] {
        &self.children[ordinal]
    }

    pub fn cites(&self, ordinal: usize) -> &[usize] {
        &self.cites_out[ordinal]
    }

    pub fn cited_by(&self, ordinal: usize) -> &[usize] {
        &self.cites_in[ordinal]
    }

    pub fn unresolved(&self) -> &[(NodeId, String)] {
        &self.raw.unresolved
    }

    pub fn citation_count(&self) -> usize {
        self.raw.citations.len()
    }

    pub fn parthood_count(&self) -> usize {
        self.raw.parthood.len()
    }

    /// Ordinals of parentless nodes.
    pub fn roots(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.parent[i].is_none())
            .collect()
    }

    pub fn children(&self, id: &NodeId) -> Result<Vec<NodeId>> {
        let i = self.ordinal(id)?;
        Ok(self.children[i]
            .iter()
            .map(|&c| self.node(c).id.clone())
            .collect())
    }

    /// Parent chain from the node's parent up to its top-level node.
    pub fn ancestors(&self, id: &NodeId) -> Result<Vec<NodeId>> {
        let i = self.ordinal(id)?;
        Ok(self
            .ancestor_ordinals(i)
            .into_iter()
            .map(|a| self.node(a).id.clone())
            .collect())
    }

    pub fn ancestor_ordinals(&self, ordinal: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut cur = self.parent[ordinal];
        while let Some(p) = cur {
            out.push(p);
            cur = self.parent[p];
        }
        out
    }

    /// Top-level node of the chain containing `ordinal`.
    pub fn root_of(&self, ordinal: usize) -> usize {
        self.ancestor_ordinals(ordinal)
            .last()
            .copied()
            .unwrap_or(ordinal)
    }

    /// True iff the two parthood chains, each including the node itself,
    /// intersect.
    pub fn same_publication(&self, a: &NodeId, b: &NodeId) -> Result<bool> {
        let (a, b) = (self.ordinal(a)?, self.ordinal(b)?);
        let mut chain_a: HashSet<usize> = self.ancestor_ordinals(a).into_iter().collect();
        chain_a.insert(a);
        Ok(b == a
            || chain_a.contains(&b)
            || self
                .ancestor_ordinals(b)
                .iter()
                .any(|x| chain_a.contains(x)))
    }

    /// Parent, children, siblings, cited and citing nodes; never the node
    /// itself.
    pub fn neighbors(&self, id: &NodeId) -> Result<BTreeSet<NodeId>> {
        let i = self.ordinal(id)?;
        Ok(self.neighbors[i]
            .iter()
            .map(|&(n, _)| self.node(n).id.clone())
            .collect())
    }

    /// Neighbor ordinals in canonical order, with the relations that make
    /// each one a neighbor.
    pub fn neighbor_relations(&self, ordinal: usize) -> &[(usize, Relation)] {
        &self.neighbors[ordinal]
    }

    pub fn degree(&self, ordinal: usize) -> usize {
        self.neighbors[ordinal].len()
    }

    pub fn is_neighbor(&self, a: usize, b: usize) -> bool {
        self.neighbors[a]
            .binary_search_by_key(&b, |&(n, _)| n)
            .is_ok()
    }

    pub fn validate(&self) -> Vec<Violation> {
        self.raw.validate()
    }

    /// Titles and bodies of every node, in canonical order.
    pub fn full_text(&self) -> String {
        let mut s = String::new();
        for unit in self.nodes() {
            s.push_str(&unit.text());
            s.push('\n');
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn section(doc: &str, code: &str) -> InfoUnit {
        InfoUnit {
            id: NodeId::section(doc, code),
            doc_id: doc.into(),
            section_code: Some(code.into()),
            title: format!("{code} Title"),
            body: String::new(),
            kind: NodeKind::Section,
            is_tabular: false,
        }
    }

    fn chain() -> InfoGraph {
        let mut b = GraphBuilder::new();
        b.add_node(InfoUnit::document("D", "Doc")).unwrap();
        for c in ["1", "1.1", "1.2", "1.2.3"] {
            b.add_node(section("D", c)).unwrap();
        }
        let id = |c: &str| NodeId::section("D", c);
        b.add_parthood(&id("1"), &NodeId::document("D")).unwrap();
        b.add_parthood(&id("1.1"), &id("1")).unwrap();
        b.add_parthood(&id("1.2"), &id("1")).unwrap();
        b.add_parthood(&id("1.2.3"), &id("1.2")).unwrap();
        b.freeze().unwrap()
    }

    #[test]
    fn add_node_and_duplicates() {
        let mut b = GraphBuilder::new();
        b.add_node(InfoUnit::document("D", "Doc")).unwrap();
        assert_eq!(b.len(), 1);
        let err = b.add_node(InfoUnit::document("D", "Doc")).unwrap_err();
        assert!(matches!(err, Error::DuplicateNode(id) if id.as_str() == "D"));
        let g = b.freeze().unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g.parthood_count() + g.citation_count(), 0);
    }

    #[test]
    fn children_listing() {
        let mut b = GraphBuilder::new();
        for n in ["1", "2", "3"] {
            b.add_node(InfoUnit::document(n, n)).unwrap();
        }
        b.add_parthood(&"2".into(), &"1".into()).unwrap();
        b.add_parthood(&"3".into(), &"1".into()).unwrap();
        let g = b.freeze().unwrap();
        assert_eq!(
            g.children(&"1".into()).unwrap(),
            vec![NodeId::from("2"), NodeId::from("3")]
        );
    }

    #[test]
    fn second_parent_rejected() {
        let mut b = GraphBuilder::new();
        for n in ["a", "b", "c"] {
            b.add_node(InfoUnit::document(n, n)).unwrap();
        }
        b.add_parthood(&"a".into(), &"b".into()).unwrap();
        assert!(matches!(
            b.add_parthood(&"a".into(), &"c".into()),
            Err(Error::SecondParent { .. })
        ));
        assert!(matches!(
            b.add_parthood(&"a".into(), &"a".into()),
            Err(Error::SelfLoop(_))
        ));
    }

    #[test]
    fn ancestors_chain() {
        let g = chain();
        let got = g.ancestors(&NodeId::section("D", "1.2.3")).unwrap();
        let want: Vec<NodeId> = vec![
            NodeId::section("D", "1.2"),
            NodeId::section("D", "1"),
            NodeId::document("D"),
        ];
        assert_eq!(got, want);
        assert!(g.ancestors(&NodeId::document("D")).unwrap().is_empty());
        assert!(matches!(
            g.ancestors(&"nope".into()),
            Err(Error::UnknownNode(_))
        ));
    }

    #[test]
    fn same_publication_cases() {
        let g = chain();
        let id = |c: &str| NodeId::section("D", c);
        assert!(g.same_publication(&id("1.1"), &id("1.2")).unwrap());
        assert!(g
            .same_publication(&NodeId::document("D"), &id("1.2.3"))
            .unwrap());
        assert!(g.same_publication(&id("1.1"), &id("1.1")).unwrap());

        let mut b = GraphBuilder::new();
        b.add_node(InfoUnit::document("A", "A")).unwrap();
        b.add_node(InfoUnit::document("B", "B")).unwrap();
        b.add_node(section("B", "1")).unwrap();
        b.add_parthood(&NodeId::section("B", "1"), &"B".into())
            .unwrap();
        let g = b.freeze().unwrap();
        assert!(!g
            .same_publication(&"A".into(), &NodeId::section("B", "1"))
            .unwrap());
    }

    #[test]
    fn neighbors_cases() {
        let g = chain();
        let got = g.neighbors(&NodeId::section("D", "1.2")).unwrap();
        let want: BTreeSet<NodeId> = [
            NodeId::section("D", "1"),
            NodeId::section("D", "1.1"),
            NodeId::section("D", "1.2.3"),
        ]
        .into_iter()
        .collect();
        assert_eq!(got, want);

        let mut b = GraphBuilder::new();
        b.add_node(InfoUnit::document("X", "X")).unwrap();
        assert!(!b.add_citation(&"X".into(), &"X".into()).unwrap());
        let g = b.freeze().unwrap();
        assert!(g.neighbors(&"X".into()).unwrap().is_empty());
    }

    #[test]
    fn top_level_documents_are_not_siblings() {
        let mut b = GraphBuilder::new();
        b.add_node(InfoUnit::document("A", "A")).unwrap();
        b.add_node(InfoUnit::document("B", "B")).unwrap();
        let g = b.freeze().unwrap();
        assert!(g.neighbors(&"A".into()).unwrap().is_empty());
    }

    #[test]
    fn citations_count_both_directions() {
        let mut b = GraphBuilder::new();
        b.add_node(InfoUnit::document("A", "A")).unwrap();
        b.add_node(InfoUnit::document("B", "B")).unwrap();
        assert!(b.add_citation(&"A".into(), &"B".into()).unwrap());
        assert!(!b.add_citation(&"A".into(), &"B".into()).unwrap());
        let g = b.freeze().unwrap();
        assert_eq!(g.neighbors(&"B".into()).unwrap().len(), 1);
        let rel = g.neighbor_relations(1)[0].1;
        assert!(rel.contains(Relation::CITED_BY));
        assert!(!rel.contains(Relation::CITES));
    }

    #[test]
    fn validate_reports_cycle_and_dangling() {
        let well = chain();
        assert!(well.validate().is_empty());

        let unit = |id: &str| InfoUnit::document(id, id);
        let file = GraphFile {
            nodes: vec![unit("A"), unit("B")],
            parthood: vec![("A".into(), "B".into()), ("B".into(), "A".into())],
            citations: vec![],
            unresolved: vec![],
        };
        let v = GraphBuilder::from_file(file).validate();
        assert_eq!(v.len(), 1, "{v:?}");
        assert!(matches!(v[0], Violation::ParthoodCycle { .. }));

        let file = GraphFile {
            nodes: vec![unit("A")],
            parthood: vec![],
            citations: vec![("A".into(), "gone".into())],
            unresolved: vec![],
        };
        let v = GraphBuilder::from_file(file.clone()).validate();
        assert_eq!(v.len(), 1);
        assert!(
            matches!(&v[0], Violation::DanglingEdge { missing, .. } if missing.as_str() == "gone")
        );
        assert!(matches!(
            InfoGraph::from_file(file),
            Err(Error::InvalidGraph(_))
        ));
    }

    #[test]
    fn validate_reports_multiple_parents() {
        let unit = |id: &str| InfoUnit::document(id, id);
        let file = GraphFile {
            nodes: vec![unit("A"), unit("B"), unit("C")],
            parthood: vec![("A".into(), "B".into()), ("A".into(), "C".into())],
            citations: vec![],
            unresolved: vec![],
        };
        let v = GraphBuilder::from_file(file).validate();
        assert!(
            matches!(&v[..], [Violation::MultipleParents { parents, .. }] if parents.len() == 2)
        );
    }

    #[test]
    fn file_round_trip() {
        let g = chain();
        let file = g.to_file();
        let json = serde_json::to_string(&file).unwrap();
        let back: GraphFile = serde_json::from_str(&json).unwrap();
        let g2 = InfoGraph::from_file(back).unwrap();
        assert_eq!(g2.to_file(), file);
    }
}
