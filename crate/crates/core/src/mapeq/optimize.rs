//! Greedy node moving with module aggregation (Louvain scheme) on the map equation.

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{
    canonical_labels, plogp, stationary_flow, FlowNetwork, MapEqError, ModuleSummary, Partition,
    VisitDistribution, DEFAULT_TELEPORT,
};
use crate::graph::Digraph;

/// Smallest codelength decrease (bits) that counts as an improvement.
const MIN_IMPROVEMENT: f64 = 1e-10;
const MAX_PASSES_PER_LEVEL: usize = 500;
const MAX_TUNE_ROUNDS: usize = 50;
/// Levels with at most this many nodes try every module as a move target,
/// since teleportation links every pair of modules.
const FULL_CANDIDATE_LIMIT: usize = 128;

/// Nodes of one aggregation level. Level 0 nodes are the network nodes;
/// higher-level nodes are modules of the level below.
#[derive(Debug, Clone)]
struct Level {
    visit: Vec<f64>,
    teleport: Vec<f64>,
    size: Vec<usize>,
    out: Vec<Vec<(usize, f64)>>,
    inn: Vec<Vec<(usize, f64)>>,
    out_total: Vec<f64>,
}

impl Level {
    fn base(fnet: &FlowNetwork) -> Level {
        let n = fnet.node_count();
        let mut inn = vec![Vec::new(); n];
        for (u, links) in fnet.out_links.iter().enumerate() {
            for &(v, f) in links {
                inn[v].push((u, f));
            }
        }
        Level {
            visit: fnet.visits.clone(),
            teleport: fnet.teleport_mass.clone(),
            size: vec![1; n],
            out_total: fnet
                .out_links
                .iter()
                .map(|l| l.iter().map(|e| e.1).sum())
                .collect(),
            out: fnet.out_links.clone(),
            inn,
        }
    }

    fn len(&self) -> usize {
        self.visit.len()
    }

    /// Collapses modules (dense ids `0..k`) into the nodes of a new level.
    /// Flow inside a module disappears; flow between modules is summed.
    fn aggregate(&self, module_of: &[usize], k: usize) -> Level {
        let mut visit = vec![0.0; k];
        let mut teleport = vec![0.0; k];
        let mut size = vec![0; k];
        let mut links = std::collections::BTreeMap::<(usize, usize), f64>::new();
        for u in 0..self.len() {
            let a = module_of[u];
            visit[a] += self.visit[u];
            teleport[a] += self.teleport[u];
            size[a] += self.size[u];
            for &(v, f) in &self.out[u] {
                let b = module_of[v];
                if a != b {
                    *links.entry((a, b)).or_insert(0.0) += f;
                }
            }
        }
        let mut out = vec![Vec::new(); k];
        let mut inn = vec![Vec::new(); k];
        let mut out_total = vec![0.0; k];
        for ((a, b), f) in links {
            out[a].push((b, f));
            inn[b].push((a, f));
            out_total[a] += f;
        }
        Level {
            visit,
            teleport,
            size,
            out,
            inn,
            out_total,
        }
    }
}

/// Module aggregates for one level plus cached codelength sums.
struct ModuleState {
    total_nodes: f64,
    node_term: f64,
    module_of: Vec<usize>,
    visit: Vec<f64>,
    teleport: Vec<f64>,
    size: Vec<usize>,
    link_exit: Vec<f64>,
    members: Vec<usize>,
    empty: Vec<usize>,
    exit_sum: f64,
    exit_terms: f64,
    total_terms: f64,
    // scratch for neighbour flows
    out_to: Vec<f64>,
    in_from: Vec<f64>,
    touched: Vec<usize>,
}

impl ModuleState {
    fn new(level: &Level, module_of: Vec<usize>, total_nodes: usize, node_term: f64) -> Self {
        let k = level.len();
        let mut state = ModuleState {
            total_nodes: total_nodes as f64,
            node_term,
            module_of,
            visit: vec![0.0; k],
            teleport: vec![0.0; k],
            size: vec![0; k],
            link_exit: vec![0.0; k],
            members: vec![0; k],
            empty: Vec::new(),
            exit_sum: 0.0,
            exit_terms: 0.0,
            total_terms: 0.0,
            out_to: vec![0.0; k],
            in_from: vec![0.0; k],
            touched: Vec::new(),
        };
        state.recompute(level);
        state
    }

    fn exit_of(&self, teleport: f64, size: usize, link_exit: f64) -> f64 {
        teleport * (self.total_nodes - size as f64) / self.total_nodes + link_exit
    }

    fn exit(&self, m: usize) -> f64 {
        if self.members[m] == 0 {
            0.0
        } else {
            self.exit_of(self.teleport[m], self.size[m], self.link_exit[m])
        }
    }

    /// Rebuilds every aggregate from the assignment, discarding accumulated rounding.
    fn recompute(&mut self, level: &Level) {
        let k = level.len();
        self.visit.iter_mut().for_each(|x| *x = 0.0);
        self.teleport.iter_mut().for_each(|x| *x = 0.0);
        self.link_exit.iter_mut().for_each(|x| *x = 0.0);
        self.size.iter_mut().for_each(|x| *x = 0);
        self.members.iter_mut().for_each(|x| *x = 0);
        for u in 0..k {
            let m = self.module_of[u];
            self.visit[m] += level.visit[u];
            self.teleport[m] += level.teleport[u];
            self.size[m] += level.size[u];
            self.members[m] += 1;
            for &(v, f) in &level.out[u] {
                if self.module_of[v] != m {
                    self.link_exit[m] += f;
                }
            }
        }
        self.empty = (0..k).rev().filter(|&m| self.members[m] == 0).collect();
        self.exit_sum = 0.0;
        self.exit_terms = 0.0;
        self.total_terms = 0.0;
        for m in 0..k {
            if self.members[m] > 0 {
                let exit = self.exit(m);
                self.exit_sum += exit;
                self.exit_terms += plogp(exit);
                self.total_terms += plogp(exit + self.visit[m]);
            }
        }
    }

    fn codelength(&self) -> f64 {
        plogp(self.exit_sum) - 2.0 * self.exit_terms - self.node_term + self.total_terms
    }

    /// One sweep over `order`; returns the number of accepted moves.
    fn pass(&mut self, level: &Level, order: &[usize]) -> usize {
        let mut moves = 0;
        for &s in order {
            let a = self.module_of[s];
            self.touched.clear();
            for &(v, f) in &level.out[s] {
                let m = self.module_of[v];
                if self.out_to[m] == 0.0 && self.in_from[m] == 0.0 {
                    self.touched.push(m);
                }
                self.out_to[m] += f;
            }
            for &(v, f) in &level.inn[s] {
                let m = self.module_of[v];
                if self.out_to[m] == 0.0 && self.in_from[m] == 0.0 {
                    self.touched.push(m);
                }
                self.in_from[m] += f;
            }
            self.touched.sort_unstable();
            self.touched.dedup();

            let p_s = level.visit[s];
            let t_s = level.teleport[s];
            let c_s = level.size[s];
            let o_s = level.out_total[s];

            let exit_a = self.exit(a);
            let (visit_a2, exit_a2) = if self.members[a] == 1 {
                (0.0, 0.0)
            } else {
                let link = self.link_exit[a] - (o_s - self.out_to[a]) + self.in_from[a];
                (
                    self.visit[a] - p_s,
                    self.exit_of(self.teleport[a] - t_s, self.size[a] - c_s, link),
                )
            };

            let mut candidates: Vec<usize> = if level.len() <= FULL_CANDIDATE_LIMIT {
                (0..level.len())
                    .filter(|&m| m != a && self.members[m] > 0)
                    .collect()
            } else {
                self.touched.iter().copied().filter(|&m| m != a).collect()
            };
            if self.members[a] > 1 {
                if let Some(&fresh) = self.empty.last() {
                    candidates.push(fresh);
                }
            }

            let mut best: Option<(usize, f64, f64)> = None;
            for b in candidates {
                let exit_b = self.exit(b);
                let link_b = self.link_exit[b] + (o_s - self.out_to[b]) - self.in_from[b];
                let exit_b2 = self.exit_of(self.teleport[b] + t_s, self.size[b] + c_s, link_b);
                let new_sum = self.exit_sum - exit_a - exit_b + exit_a2 + exit_b2;
                let delta = plogp(new_sum) - plogp(self.exit_sum)
                    - 2.0 * (plogp(exit_a2) + plogp(exit_b2) - plogp(exit_a) - plogp(exit_b))
                    + plogp(exit_a2 + visit_a2)
                    + plogp(exit_b2 + self.visit[b] + p_s)
                    - plogp(exit_a + self.visit[a])
                    - plogp(exit_b + self.visit[b]);
                if best.is_none_or(|(_, d, _)| delta < d) {
                    best = Some((b, delta, link_b));
                }
            }

            if let Some((b, _, link_b)) = best.filter(|&(_, d, _)| d < -MIN_IMPROVEMENT) {
                let link_a = self.link_exit[a] - (o_s - self.out_to[a]) + self.in_from[a];
                self.apply_move(s, a, b, level, link_a, link_b);
                moves += 1;
            }

            for &m in &self.touched {
                self.out_to[m] = 0.0;
                self.in_from[m] = 0.0;
            }
            self.out_to[a] = 0.0;
            self.in_from[a] = 0.0;
        }
        moves
    }

    fn remove_terms(&mut self, m: usize) {
        if self.members[m] > 0 {
            let exit = self.exit(m);
            self.exit_sum -= exit;
            self.exit_terms -= plogp(exit);
            self.total_terms -= plogp(exit + self.visit[m]);
        }
    }

    fn add_terms(&mut self, m: usize) {
        if self.members[m] > 0 {
            let exit = self.exit(m);
            self.exit_sum += exit;
            self.exit_terms += plogp(exit);
            self.total_terms += plogp(exit + self.visit[m]);
        }
    }

    fn apply_move(&mut self, s: usize, a: usize, b: usize, level: &Level, link_a: f64, link_b: f64) {
        self.remove_terms(a);
        self.remove_terms(b);
        if self.members[b] == 0 {
            let pos = self
                .empty
                .iter()
                .position(|&m| m == b)
                .expect("empty candidate is tracked");
            self.empty.remove(pos);
        }
        self.members[a] -= 1;
        if self.members[a] == 0 {
            self.visit[a] = 0.0;
            self.teleport[a] = 0.0;
            self.size[a] = 0;
            self.link_exit[a] = 0.0;
            self.empty.push(a);
        } else {
            self.visit[a] -= level.visit[s];
            self.teleport[a] -= level.teleport[s];
            self.size[a] -= level.size[s];
            self.link_exit[a] = link_a;
        }
        self.members[b] += 1;
        self.visit[b] += level.visit[s];
        self.teleport[b] += level.teleport[s];
        self.size[b] += level.size[s];
        self.link_exit[b] = link_b;
        self.module_of[s] = b;
        self.add_terms(a);
        self.add_terms(b);
    }
}

/// Result of one seeded optimizer run with its codelength after every pass.
#[derive(Debug, Clone, Serialize)]
pub struct OptimizeOutcome {
    pub partition: Partition,
    pub trace: Vec<f64>,
}

fn dense(module_of: &[usize]) -> (Vec<usize>, usize) {
    let labels = canonical_labels(module_of);
    let k = labels.iter().max().map_or(0, |m| m + 1);
    (labels, k)
}

fn optimize_flow(fnet: &FlowNetwork, seed: u64) -> OptimizeOutcome {
    let n = fnet.node_count();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let node_term: f64 = fnet.visits.iter().map(|&p| plogp(p)).sum();
    let base = Level::base(fnet);
    let mut node_module: Vec<usize> = (0..n).collect();
    let mut trace = Vec::new();
    let mut best = f64::INFINITY;

    for _round in 0..MAX_TUNE_ROUNDS {
        let mut level = base.clone();
        let mut super_of_node: Vec<usize> = (0..n).collect();
        let mut init = node_module.clone();
        let mut current;
        loop {
            let mut state = ModuleState::new(&level, init, n, node_term);
            let mut order: Vec<usize> = (0..level.len()).collect();
            for _ in 0..MAX_PASSES_PER_LEVEL {
                order.shuffle(&mut rng);
                let moves = state.pass(&level, &order);
                state.recompute(&level);
                trace.push(state.codelength());
                if moves == 0 {
                    break;
                }
            }
            current = state.codelength();
            let (labels, k) = dense(&state.module_of);
            for m in super_of_node.iter_mut() {
                *m = labels[*m];
            }
            if k == level.len() {
                break;
            }
            level = level.aggregate(&labels, k);
            init = (0..k).collect();
        }
        node_module = super_of_node;
        if best - current > MIN_IMPROVEMENT {
            best = current;
        } else {
            break;
        }
    }

    let mut partition = Partition::from_flow(&node_module, fnet);
    let whole = Partition::from_flow(&vec![0; n], fnet);
    if whole.codelength() < partition.codelength() - MIN_IMPROVEMENT {
        partition = whole;
        trace.push(partition.codelength());
    }
    OptimizeOutcome { partition, trace }
}

/// Seeded greedy minimisation of the two-level map equation.
///
/// Each round moves single nodes to the neighbouring (or an empty) module
/// with the largest codelength decrease, visiting nodes in a seeded random
/// order, then aggregates modules and repeats on the coarser level. Later
/// rounds restart the node moves from the previous round's partition and
/// stop once a round no longer improves the codelength.
pub fn optimize(g: &Digraph, flow: &VisitDistribution, seed: u64) -> Result<Partition, MapEqError> {
    optimize_with_trace(g, flow, seed).map(|o| o.partition)
}

pub fn optimize_with_trace(
    g: &Digraph,
    flow: &VisitDistribution,
    seed: u64,
) -> Result<OptimizeOutcome, MapEqError> {
    let n = g.node_count();
    if n == 0 {
        return Err(MapEqError::EmptyNetwork);
    }
    if flow.visits.len() != n {
        return Err(MapEqError::IncompletePartition {
            expected: n,
            got: flow.visits.len(),
        });
    }
    Ok(optimize_flow(&FlowNetwork::new(g, flow), seed))
}

#[derive(Debug, Clone, Serialize)]
pub struct RestartSummary {
    pub best: Partition,
    pub best_restart: usize,
    pub seeds: Vec<u64>,
    pub codelengths: Vec<f64>,
}

/// Child seeds for `restarts` runs derived from one parent seed.
pub fn restart_seeds(seed: u64, restarts: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..restarts).map(|_| rng.next_u64()).collect()
}

/// Runs `restarts` seeded optimizations in parallel and keeps the lowest
/// codelength (earliest restart on ties).
pub fn optimize_restarts(
    g: &Digraph,
    flow: &VisitDistribution,
    seed: u64,
    restarts: usize,
) -> Result<RestartSummary, MapEqError> {
    let n = g.node_count();
    if n == 0 {
        return Err(MapEqError::EmptyNetwork);
    }
    let fnet = FlowNetwork::new(g, flow);
    let seeds = restart_seeds(seed, restarts.max(1));
    let runs: Vec<Partition> = seeds
        .par_iter()
        .map(|&s| optimize_flow(&fnet, s).partition)
        .collect();
    let codelengths: Vec<f64> = runs.iter().map(Partition::codelength).collect();
    let best_restart = codelengths
        .iter()
        .enumerate()
        .fold(0, |best, (i, &l)| if l < codelengths[best] { i } else { best });
    Ok(RestartSummary {
        best: runs[best_restart].clone(),
        best_restart,
        seeds,
        codelengths,
    })
}

/// Map-equation clustering of an undirected weighted graph.
///
/// Each edge becomes a pair of opposite directed edges of equal weight.
/// Nodes without edges carry no flow to compress and each form a singleton
/// module; the codelength refers to the subgraph of connected nodes.
pub fn cluster_undirected(
    n: usize,
    edges: &[(usize, usize, f64)],
    seed: u64,
) -> Result<Partition, MapEqError> {
    if n == 0 {
        return Err(MapEqError::EmptyNetwork);
    }
    let mut active = vec![false; n];
    for &(u, v, w) in edges {
        if u != v && w > 0.0 {
            active[u] = true;
            active[v] = true;
        }
    }
    let mut local = vec![usize::MAX; n];
    let mut global = Vec::new();
    for u in 0..n {
        if active[u] {
            local[u] = global.len();
            global.push(u);
        }
    }

    let mut assignment = vec![usize::MAX; n];
    let mut sub_modules = Vec::new();
    let mut codelength = 0.0;
    if !global.is_empty() {
        let g = Digraph::symmetric(
            global.len(),
            edges
                .iter()
                .filter(|&&(u, v, w)| u != v && w > 0.0)
                .map(|&(u, v, w)| (local[u], local[v], w)),
        );
        let flow = stationary_flow(&g, DEFAULT_TELEPORT)?;
        let part = optimize(&g, &flow, seed)?;
        for (i, &u) in global.iter().enumerate() {
            assignment[u] = part.module_of(i);
        }
        sub_modules = part.modules().to_vec();
        codelength = part.codelength();
    }
    let offset = sub_modules.len();
    let mut next = offset;
    for slot in assignment.iter_mut().filter(|m| **m == usize::MAX) {
        *slot = next;
        next += 1;
    }
    let mut summaries = sub_modules;
    summaries.extend((offset..next).map(|_| ModuleSummary {
        size: 1,
        visit: 0.0,
        exit: 0.0,
    }));
    let labels = canonical_labels(&assignment);
    let mut ordered: Vec<Option<ModuleSummary>> = vec![None; summaries.len()];
    for (&old, &new) in assignment.iter().zip(&labels) {
        ordered[new] = Some(summaries[old]);
    }
    let ordered = ordered
        .into_iter()
        .map(|s| s.expect("every module has a member"))
        .collect();
    Ok(Partition::from_raw(labels, ordered, codelength))
}
