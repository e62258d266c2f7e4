use serde::Serialize;

use super::MapEqError;
use crate::graph::Digraph;

pub const DEFAULT_TELEPORT: f64 = 0.15;
const MAX_ITERATIONS: usize = 10_000;
const TOLERANCE: f64 = 1e-12;

/// Stationary visit rates of the teleporting random walk.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VisitDistribution {
    pub visits: Vec<f64>,
    pub teleport: f64,
    /// L1 change of the final power-iteration step.
    pub residual: f64,
    pub iterations: usize,
}

/// Power iteration on the row-normalised weight matrix with uniform
/// teleportation at rate `teleport`. Dangling nodes always teleport.
pub fn stationary_flow(g: &Digraph, teleport: f64) -> Result<VisitDistribution, MapEqError> {
    let n = g.node_count();
    if n == 0 {
        return Err(MapEqError::EmptyNetwork);
    }
    if !(teleport > 0.0 && teleport < 1.0) {
        return Err(MapEqError::InvalidTeleport(teleport));
    }
    let out_weight: Vec<f64> = (0..n)
        .map(|u| g.out_edges(u).iter().map(|e| e.1).sum())
        .collect();
    let uniform = 1.0 / n as f64;
    let mut p = vec![uniform; n];
    let mut next = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for iteration in 1..=MAX_ITERATIONS {
        let mut jump = 0.0;
        next.iter_mut().for_each(|x| *x = 0.0);
        for u in 0..n {
            if out_weight[u] > 0.0 {
                jump += teleport * p[u];
                let scale = (1.0 - teleport) * p[u] / out_weight[u];
                for &(v, w) in g.out_edges(u) {
                    next[v] += scale * w;
                }
            } else {
                jump += p[u];
            }
        }
        let share = jump / n as f64;
        let mut total = 0.0;
        for x in next.iter_mut() {
            *x += share;
            total += *x;
        }
        residual = 0.0;
        for (x, old) in next.iter_mut().zip(&p) {
            *x /= total;
            residual += (*x - old).abs();
        }
        std::mem::swap(&mut p, &mut next);
        if residual < TOLERANCE {
            return Ok(VisitDistribution {
                visits: p,
                teleport,
                residual,
                iterations: iteration,
            });
        }
    }
    Err(MapEqError::NoConvergence(VisitDistribution {
        visits: p,
        teleport,
        residual,
        iterations: MAX_ITERATIONS,
    }))
}

/// Per-node flow quantities consumed by the map equation.
#[derive(Debug, Clone)]
pub(crate) struct FlowNetwork {
    pub visits: Vec<f64>,
    /// Visit mass that leaves each node by teleportation (all of it for dangling nodes).
    pub teleport_mass: Vec<f64>,
    /// Link flow `(target, flow)` per source, self-loops excluded.
    pub out_links: Vec<Vec<(usize, f64)>>,
}

impl FlowNetwork {
    pub fn new(g: &Digraph, flow: &VisitDistribution) -> Self {
        let n = g.node_count();
        let tau = flow.teleport;
        let mut teleport_mass = Vec::with_capacity(n);
        let mut out_links = Vec::with_capacity(n);
        for u in 0..n {
            let p = flow.visits[u];
            let total: f64 = g.out_edges(u).iter().map(|e| e.1).sum();
            if total > 0.0 {
                teleport_mass.push(tau * p);
                let scale = (1.0 - tau) * p / total;
                out_links.push(
                    g.out_edges(u)
                        .iter()
                        .filter(|&&(v, _)| v != u)
                        .map(|&(v, w)| (v, scale * w))
                        .collect(),
                );
            } else {
                teleport_mass.push(p);
                out_links.push(Vec::new());
            }
        }
        FlowNetwork {
            visits: flow.visits.clone(),
            teleport_mass,
            out_links,
        }
    }

    pub fn node_count(&self) -> usize {
        self.visits.len()
    }
}
