//! Finite loaded graphs and the subgraph operations used throughout the crate.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A vertex label. Labels are global: a subgraph keeps the labels of the
/// ambient graph, so vertex 1 means the same thing in every member of a
/// sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VertexId(u64);

impl VertexId {
    pub fn new(id: u64) -> Result<Self> {
        if id == 0 {
            Err(Error::InvalidVertex)
        } else {
            Ok(Self(id))
        }
    }

    /// Panics on 0; for labels known to be valid.
    pub fn of(id: u64) -> Self {
        Self::new(id).expect("vertex ids start at 1")
    }

    pub fn get(self) -> u64 {
        self.0
    }
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub from: VertexId,
    pub to: VertexId,
    pub weight: f64,
}

/// Anything that can answer "what is the weight of edge (u, w)?".
/// Implemented by finite graphs and by the infinite family descriptors.
pub trait WeightSource {
    fn weight(&self, from: VertexId, to: VertexId) -> Option<f64>;
}

/// A finite directed graph with a positive weight on every edge.
///
/// Immutable after construction. Strong connectivity is computed once and
/// cached.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedGraph {
    vertices: Vec<VertexId>,
    edges: BTreeMap<(VertexId, VertexId), f64>,
    adjacency: Vec<Vec<(usize, f64)>>,
    connected: bool,
}

impl LoadedGraph {
    /// Validate an edge list. The vertex set is the set of endpoints.
    pub fn from_edges<I>(edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (u64, u64, f64)>,
    {
        let mut map = BTreeMap::new();
        for (from, to, weight) in edges {
            if !(weight > 0.0) || !weight.is_finite() {
                return Err(Error::NonPositiveWeight { from, to, weight });
            }
            let key = (VertexId::new(from)?, VertexId::new(to)?);
            if map.insert(key, weight).is_some() {
                return Err(Error::DuplicateEdge { from, to });
            }
        }
        Self::from_map(map, BTreeSet::new())
    }

    /// Build from already validated parts. `extra_vertices` may add isolated
    /// vertices; every edge endpoint is added automatically.
    pub(crate) fn from_map(
        edges: BTreeMap<(VertexId, VertexId), f64>,
        extra_vertices: BTreeSet<VertexId>,
    ) -> Result<Self> {
        let mut vset = extra_vertices;
        for &(u, w) in edges.keys() {
            vset.insert(u);
            vset.insert(w);
        }
        if vset.is_empty() {
            return Err(Error::EmptyGraph);
        }
        let vertices: Vec<VertexId> = vset.into_iter().collect();
        let mut adjacency = vec![Vec::new(); vertices.len()];
        for (&(u, w), &weight) in &edges {
            let iu = vertices.binary_search(&u).unwrap();
            let iw = vertices.binary_search(&w).unwrap();
            adjacency[iu].push((iw, weight));
        }
        let connected = strongly_connected(&adjacency);
        Ok(Self {
            vertices,
            edges,
            adjacency,
            connected,
        })
    }

    pub fn vertices(&self) -> &[VertexId] {
        &self.vertices
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.edges.iter().map(|(&(from, to), &weight)| Edge { from, to, weight })
    }

    pub fn contains_vertex(&self, v: VertexId) -> bool {
        self.index_of(v).is_some()
    }

    pub fn contains_edge(&self, from: VertexId, to: VertexId) -> bool {
        self.edges.contains_key(&(from, to))
    }

    /// Dense index of a vertex (position in the sorted vertex list).
    pub fn index_of(&self, v: VertexId) -> Option<usize> {
        self.vertices.binary_search(&v).ok()
    }

    /// Out-neighbours by dense index.
    pub fn out_edges(&self, index: usize) -> &[(usize, f64)] {
        &self.adjacency[index]
    }

    /// Strong connectivity with at least one edge on every vertex's cycle,
    /// i.e. the weight matrix is irreducible.
    pub fn is_connected(&self) -> bool {
        self.connected
    }

    /// Weight matrix in dense row-major form, indexed like [`Self::vertices`].
    pub fn dense_matrix(&self) -> Vec<Vec<f64>> {
        let n = self.vertices.len();
        let mut m = vec![vec![0.0; n]; n];
        for (i, row) in self.adjacency.iter().enumerate() {
            for &(j, w) in row {
                m[i][j] = w;
            }
        }
        m
    }

    /// `self ⊆ other` as loaded graphs (same weights on shared edges).
    pub fn is_subgraph_of(&self, other: &LoadedGraph) -> bool {
        self.vertices.iter().all(|&v| other.contains_vertex(v))
            && self
                .edges
                .iter()
                .all(|(k, w)| other.edges.get(k).is_some_and(|ow| ow == w))
    }

    /// Edge-and-vertex union; weights must agree on shared edges.
    pub fn union(&self, other: &LoadedGraph) -> Result<LoadedGraph> {
        let mut edges = self.edges.clone();
        for (&k, &w) in &other.edges {
            if let Some(&prev) = edges.get(&k) {
                if prev != w {
                    return Err(Error::DuplicateEdge {
                        from: k.0.get(),
                        to: k.1.get(),
                    });
                }
            } else {
                edges.insert(k, w);
            }
        }
        let extra: BTreeSet<VertexId> = self
            .vertices
            .iter()
            .chain(other.vertices.iter())
            .copied()
            .collect();
        Self::from_map(edges, extra)
    }

    /// Induced subgraph on `subset`: all edges with both endpoints in it.
    pub fn principal_subgraph(&self, subset: &BTreeSet<VertexId>) -> Result<LoadedGraph> {
        if let Some(&v) = subset.iter().find(|v| !self.contains_vertex(**v)) {
            return Err(Error::VertexNotInGraph(v));
        }
        let edges = self
            .edges
            .iter()
            .filter(|((u, w), _)| subset.contains(u) && subset.contains(w))
            .map(|(&k, &w)| (k, w))
            .collect();
        Self::from_map(edges, subset.clone())
    }

    /// Length of the period (gcd of cycle lengths) of an irreducible graph.
    pub fn period(&self) -> usize {
        if self.vertices.is_empty() {
            return 0;
        }
        let n = self.vertices.len();
        let mut level = vec![usize::MAX; n];
        level[0] = 0;
        let mut queue = VecDeque::from([0usize]);
        let mut g = 0usize;
        while let Some(u) = queue.pop_front() {
            for &(w, _) in &self.adjacency[u] {
                if level[w] == usize::MAX {
                    level[w] = level[u] + 1;
                    queue.push_back(w);
                } else {
                    let diff = (level[u] + 1).abs_diff(level[w]);
                    g = gcd(g, diff);
                }
            }
        }
        g
    }
}

impl WeightSource for LoadedGraph {
    fn weight(&self, from: VertexId, to: VertexId) -> Option<f64> {
        self.edges.get(&(from, to)).copied()
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn reach(adjacency: &[Vec<(usize, f64)>], start: usize, reverse: bool) -> Vec<bool> {
    let n = adjacency.len();
    let mut seen = vec![false; n];
    let mut stack = vec![start];
    seen[start] = true;
    let rev: Vec<Vec<usize>> = if reverse {
        let mut r = vec![Vec::new(); n];
        for (u, row) in adjacency.iter().enumerate() {
            for &(w, _) in row {
                r[w].push(u);
            }
        }
        r
    } else {
        Vec::new()
    };
    while let Some(u) = stack.pop() {
        let next: Box<dyn Iterator<Item = usize>> = if reverse {
            Box::new(rev[u].iter().copied())
        } else {
            Box::new(adjacency[u].iter().map(|&(w, _)| w))
        };
        for w in next {
            if !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    seen
}

fn strongly_connected(adjacency: &[Vec<(usize, f64)>]) -> bool {
    if adjacency.is_empty() || adjacency.iter().all(|r| r.is_empty()) {
        return false;
    }
    // A single vertex needs its self-loop; larger strongly connected graphs
    // automatically put every vertex on a cycle.
    if adjacency.len() == 1 {
        return !adjacency[0].is_empty();
    }
    reach(adjacency, 0, false).iter().all(|&b| b) && reach(adjacency, 0, true).iter().all(|&b| b)
}

/// A closed path `v_1, ..., v_l, v_1` stored as its vertex sequence
/// including the final return to `v_1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CyclePath {
    vertices: Vec<VertexId>,
}

impl CyclePath {
    /// `vertices` must start and end at the same vertex and have at least
    /// two entries.
    pub fn new(vertices: Vec<VertexId>) -> Result<Self> {
        if vertices.len() < 2 || vertices.first() != vertices.last() {
            return Err(Error::Parse(
                "a cycle must start and end at the same vertex".to_string(),
            ));
        }
        Ok(Self { vertices })
    }

    pub fn base(&self) -> VertexId {
        self.vertices[0]
    }

    pub fn len(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn vertices(&self) -> &[VertexId] {
        &self.vertices
    }

    pub fn steps(&self) -> impl Iterator<Item = (VertexId, VertexId)> + '_ {
        self.vertices.windows(2).map(|w| (w[0], w[1]))
    }

    /// No interior visit to the base vertex.
    pub fn is_simple_at_base(&self) -> bool {
        let b = self.base();
        self.vertices[1..self.vertices.len() - 1].iter().all(|&u| u != b)
    }

    /// Largest vertex label visited.
    pub fn max_vertex(&self) -> VertexId {
        *self.vertices.iter().max().unwrap()
    }

    /// Product of edge weights along the path.
    pub fn weight<S: WeightSource + ?Sized>(&self, source: &S) -> Result<f64> {
        let mut w = 1.0;
        for (a, b) in self.steps() {
            w *= source
                .weight(a, b)
                .ok_or(Error::PathNotInGraph { from: a, to: b })?;
        }
        Ok(w)
    }
}

/// The minimal subgraph containing every path of `paths`, with weights taken
/// from `source`.
pub fn subgraph_generated_by<S: WeightSource + ?Sized>(
    source: &S,
    paths: &[CyclePath],
) -> Result<LoadedGraph> {
    if paths.is_empty() {
        return Err(Error::EmptyFamily);
    }
    let mut edges = BTreeMap::new();
    for path in paths {
        for (a, b) in path.steps() {
            let w = source
                .weight(a, b)
                .ok_or(Error::PathNotInGraph { from: a, to: b })?;
            edges.insert((a, b), w);
        }
    }
    LoadedGraph::from_map(edges, BTreeSet::new())
}

/// Result of probing a finite prefix of a subgraph sequence for Def.-style
/// exhaustiveness. A finite prefix can refute exhaustiveness or be consistent
/// with it, never prove it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExhaustiveProbe {
    pub nested: bool,
    /// First position `k` where `G_k ⊄ G_{k+1}`.
    pub first_nesting_violation: Option<usize>,
    pub covers_probe: bool,
}

impl ExhaustiveProbe {
    pub fn is_consistent(&self) -> bool {
        self.nested && self.covers_probe
    }
}

/// Check nesting of `seq` and that its union covers every vertex and edge
/// of `ambient`.
pub fn exhaustive_probe(ambient: &LoadedGraph, seq: &[LoadedGraph]) -> ExhaustiveProbe {
    let first_nesting_violation = seq
        .windows(2)
        .position(|w| !w[0].is_subgraph_of(&w[1]));
    let covers_probe = match seq.last() {
        // For a nested sequence the last element is the union.
        Some(last) if first_nesting_violation.is_none() => {
            ambient.vertices().iter().all(|&v| last.contains_vertex(v))
                && ambient.edges().all(|e| last.contains_edge(e.from, e.to))
        }
        Some(_) => {
            let vs: BTreeSet<VertexId> =
                seq.iter().flat_map(|g| g.vertices().iter().copied()).collect();
            let es: BTreeSet<(VertexId, VertexId)> = seq
                .iter()
                .flat_map(|g| g.edges().map(|e| (e.from, e.to)).collect::<Vec<_>>())
                .collect();
            ambient.vertices().iter().all(|v| vs.contains(v))
                && ambient.edges().all(|e| es.contains(&(e.from, e.to)))
        }
        None => false,
    };
    ExhaustiveProbe {
        nested: first_nesting_violation.is_none(),
        first_nesting_violation,
        covers_probe,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn golden() -> LoadedGraph {
        LoadedGraph::from_edges([(1, 1, 1.0), (1, 2, 1.0), (2, 1, 1.0)]).unwrap()
    }

    fn set(ids: &[u64]) -> BTreeSet<VertexId> {
        ids.iter().map(|&i| VertexId::of(i)).collect()
    }

    #[test]
    fn builds_golden_mean() {
        let g = golden();
        assert_eq!(g.vertex_count(), 2);
        assert_eq!(g.edge_count(), 3);
        assert!(g.is_connected());
        assert_eq!(g.period(), 1);
    }

    #[test]
    fn rejects_bad_weights_and_duplicates() {
        assert_eq!(
            LoadedGraph::from_edges([(1, 2, 0.0)]),
            Err(Error::NonPositiveWeight { from: 1, to: 2, weight: 0.0 })
        );
        assert!(matches!(
            LoadedGraph::from_edges([(1, 2, -1.0)]),
            Err(Error::NonPositiveWeight { .. })
        ));
        assert_eq!(
            LoadedGraph::from_edges([(1, 2, 1.0), (1, 2, 2.0)]),
            Err(Error::DuplicateEdge { from: 1, to: 2 })
        );
        assert_eq!(LoadedGraph::from_edges([(0, 2, 1.0)]), Err(Error::InvalidVertex));
        assert_eq!(LoadedGraph::from_edges([]), Err(Error::EmptyGraph));
    }

    #[test]
    fn connectivity() {
        assert!(!LoadedGraph::from_edges([(1, 1, 1.0), (2, 2, 1.0)]).unwrap().is_connected());
        assert!(!LoadedGraph::from_edges([(1, 2, 1.0)]).unwrap().is_connected());
        assert!(LoadedGraph::from_edges([(1, 1, 3.0)]).unwrap().is_connected());
        let two_cycle = LoadedGraph::from_edges([(1, 2, 1.0), (2, 1, 1.0)]).unwrap();
        assert!(two_cycle.is_connected());
        assert_eq!(two_cycle.period(), 2);
    }

    #[test]
    fn principal_subgraph_cases() {
        let g = golden();
        assert_eq!(g.principal_subgraph(&set(&[1, 2])).unwrap(), g);
        let one = g.principal_subgraph(&set(&[1])).unwrap();
        assert_eq!(one.edge_count(), 1);
        assert!(one.contains_edge(VertexId::of(1), VertexId::of(1)));
        assert_eq!(
            g.principal_subgraph(&set(&[3])),
            Err(Error::VertexNotInGraph(VertexId::of(3)))
        );
    }

    #[test]
    fn principal_subgraph_keeps_isolated_vertices() {
        let g = LoadedGraph::from_edges([(1, 2, 1.0), (2, 1, 1.0), (2, 3, 1.0), (3, 2, 1.0)]).unwrap();
        let h = g.principal_subgraph(&set(&[1, 3])).unwrap();
        assert_eq!(h.vertex_count(), 2);
        assert_eq!(h.edge_count(), 0);
    }

    #[test]
    fn generated_subgraph() {
        let g = golden();
        let c = CyclePath::new(vec![VertexId::of(1), VertexId::of(2), VertexId::of(1)]).unwrap();
        let h = subgraph_generated_by(&g, &[c.clone()]).unwrap();
        assert_eq!(h.edge_count(), 2);
        assert!(h.is_connected());
        assert_eq!(subgraph_generated_by(&g, &[]), Err(Error::EmptyFamily));
        let bad = CyclePath::new(vec![VertexId::of(2), VertexId::of(2)]).unwrap();
        assert!(matches!(
            subgraph_generated_by(&g, &[bad]),
            Err(Error::PathNotInGraph { .. })
        ));
        assert_eq!(c.weight(&g).unwrap(), 1.0);
        assert!(c.is_simple_at_base());
        assert_eq!(c.len(), 2);
    }

    #[test]
    fn cycle_path_validation() {
        assert!(CyclePath::new(vec![VertexId::of(1)]).is_err());
        assert!(CyclePath::new(vec![VertexId::of(1), VertexId::of(2)]).is_err());
        let c = CyclePath::new(vec![
            VertexId::of(1),
            VertexId::of(1),
            VertexId::of(1),
        ])
        .unwrap();
        assert!(!c.is_simple_at_base());
    }

    #[test]
    fn exhaustive_probe_detects_nesting_and_coverage() {
        let g = golden();
        let loop_only = LoadedGraph::from_edges([(1, 1, 1.0)]).unwrap();
        let without_loop = LoadedGraph::from_edges([(1, 2, 1.0), (2, 1, 1.0)]).unwrap();
        let p = exhaustive_probe(&g, &[loop_only.clone(), g.clone()]);
        assert!(p.is_consistent());
        let p = exhaustive_probe(&g, &[g.clone(), loop_only.clone()]);
        assert!(!p.nested);
        assert_eq!(p.first_nesting_violation, Some(0));
        let p = exhaustive_probe(&g, &[without_loop.clone(), without_loop]);
        assert!(p.nested && !p.covers_probe);
    }
}
