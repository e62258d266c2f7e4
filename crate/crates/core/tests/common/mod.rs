//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shipflow::graph::Digraph;
use shipflow::mapeq::{codelength, VisitDistribution};

/// Every set partition of `0..n` as a restricted growth string.
pub fn all_partitions(n: usize) -> Vec<Vec<usize>> {
    fn rec(i: usize, n: usize, cur: &mut Vec<usize>, max: usize, out: &mut Vec<Vec<usize>>) {
        if i == n {
            out.push(cur.clone());
            return;
        }
        for m in 0..=max + 1 {
            cur.push(m);
            rec(i + 1, n, cur, max.max(m), out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if n == 0 {
        return out;
    }
    rec(1, n, &mut vec![0], 0, &mut out);
    out
}

/// Minimum codelength over all partitions, by brute force.
pub fn exhaustive_minimum(g: &Digraph, flow: &VisitDistribution) -> (f64, Vec<usize>) {
    all_partitions(g.node_count())
        .into_iter()
        .map(|p| (codelength(&p, flow, g).unwrap(), p))
        .fold((f64::INFINITY, Vec::new()), |best, cur| {
            if cur.0 < best.0 {
                cur
            } else {
                best
            }
        })
}

/// Seeded random weighted digraph on `n` nodes with edge probability `density`.
pub fn random_digraph(seed: u64, n: usize, density: f64) -> Digraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in 0..n {
            if u != v && rng.gen_bool(density) {
                edges.push((u, v, rng.gen_range(0.1..1.0)));
            }
        }
    }
    Digraph::from_edges(n, edges)
}

/// All-pairs hop distances by Floyd–Warshall on the unweighted graph.
pub fn floyd_warshall(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<Option<u64>>> {
    let mut d = vec![vec![None; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = Some(0);
    }
    for &(u, v) in edges {
        if u != v {
            d[u][v] = Some(1);
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if let (Some(a), Some(b)) = (d[i][k], d[k][j]) {
                    if d[i][j].is_none_or(|c| a + b < c) {
                        d[i][j] = Some(a + b);
                    }
                }
            }
        }
    }
    d
}

/// (mean finite distance, diameter, reachable ordered pairs, unreachable ordered pairs)
/// computed with a plain queue BFS over a hash-free adjacency list.
pub fn bfs_oracle(n: usize, edges: &[(usize, usize)]) -> (Option<f64>, Option<u64>, u64, u64) {
    let mut adj: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &(u, v) in edges {
        adj.entry(u).or_default().push(v);
    }
    let (mut sum, mut reach, mut diameter, mut unreachable) = (0u64, 0u64, None, 0u64);
    for s in 0..n {
        let mut dist: Vec<Option<u64>> = vec![None; n];
        dist[s] = Some(0);
        let mut q = VecDeque::from([s]);
        while let Some(u) = q.pop_front() {
            for &v in adj.get(&u).map(Vec::as_slice).unwrap_or(&[]) {
                if dist[v].is_none() {
                    dist[v] = Some(dist[u].unwrap() + 1);
                    q.push_back(v);
                }
            }
        }
        for (t, d) in dist.iter().enumerate() {
            if t == s {
                continue;
            }
            match d {
                Some(d) => {
                    sum += d;
                    reach += 1;
                    diameter = Some(diameter.map_or(*d, |m: u64| m.max(*d)));
                }
                None => unreachable += 1,
            }
        }
    }
    let mean = (reach > 0).then(|| sum as f64 / reach as f64);
    (mean, diameter, reach, unreachable)
}
