//! Compact directed weighted graph over dense node indices.

use std::collections::{BTreeMap, VecDeque};

#[derive(Debug, Clone, PartialEq)]
pub struct Digraph {
    out: Vec<Vec<(usize, f64)>>,
}

impl Digraph {
    pub fn empty(n: usize) -> Self {
        Digraph {
            out: vec![Vec::new(); n],
        }
    }

    /// Builds a graph from `(source, target, weight)` triples.
    /// Parallel edges are merged by summing weights; zero-weight edges are dropped.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Self {
        let mut merged: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (u, v, w) in edges {
            assert!(u < n && v < n, "edge ({u}, {v}) out of range for {n} nodes");
            *merged.entry((u, v)).or_insert(0.0) += w;
        }
        let mut out = vec![Vec::new(); n];
        for ((u, v), w) in merged {
            if w > 0.0 {
                out[u].push((v, w));
            }
        }
        Digraph { out }
    }

    /// Doubly-directed version of an undirected edge list.
    pub fn symmetric(n: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Self {
        Self::from_edges(
            n,
            edges
                .into_iter()
                .flat_map(|(u, v, w)| [(u, v, w), (v, u, w)]),
        )
    }

    pub fn node_count(&self) -> usize {
        self.out.len()
    }

    pub fn edge_count(&self) -> usize {
        self.out.iter().map(Vec::len).sum()
    }

    /// Out-neighbours of `u` with edge weights, sorted by target.
    pub fn out_edges(&self, u: usize) -> &[(usize, f64)] {
        &self.out[u]
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.out
            .iter()
            .enumerate()
            .flat_map(|(u, adj)| adj.iter().map(move |&(v, w)| (u, v, w)))
    }

    pub fn out_degree(&self, u: usize) -> usize {
        self.out[u].len()
    }

    pub fn in_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.node_count()];
        for (_, v, _) in self.edges() {
            deg[v] += 1;
        }
        deg
    }

    pub fn total_weight(&self) -> f64 {
        self.edges().map(|e| e.2).sum()
    }

    /// Unweighted hop distances from `source`; `None` for unreachable nodes.
    pub fn bfs(&self, source: usize) -> Vec<Option<u32>> {
        let mut dist = vec![None; self.node_count()];
        dist[source] = Some(0);
        let mut queue = VecDeque::from([source]);
        while let Some(u) = queue.pop_front() {
            let du = dist[u].expect("queued nodes have a distance");
            for &(v, _) in &self.out[u] {
                if dist[v].is_none() {
                    dist[v] = Some(du + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// Copy of the graph keeping only edges for which `keep` returns true.
    pub fn filter_edges(&self, mut keep: impl FnMut(usize, usize, f64) -> bool) -> Digraph {
        let out = self
            .out
            .iter()
            .enumerate()
            .map(|(u, adj)| adj.iter().copied().filter(|&(v, w)| keep(u, v, w)).collect())
            .collect();
        Digraph { out }
    }
}
