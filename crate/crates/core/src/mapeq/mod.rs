//! Two-level map-equation clustering of directed weighted networks.
//!
//! Flow comes from a random walk that teleports uniformly with probability
//! `teleport` (dangling nodes always teleport). Teleportation steps are
//! recorded, so teleport flow landing outside a module counts towards that
//! module's exit rate. For a partition `M` with module exit rates `q_m` and
//! module visit masses `p_m`, the description length in bits is
//!
//! ```text
//! L(M) = plogp(Σ q_m) - 2 Σ plogp(q_m) - Σ_α plogp(p_α) + Σ plogp(q_m + p_m)
//! ```
//!
//! which equals the visit-rate entropy when every node shares one module.

mod flow;
mod optimize;

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::Serialize;
use thiserror::Error;

use crate::graph::Digraph;

pub use flow::{stationary_flow, VisitDistribution, DEFAULT_TELEPORT};
pub(crate) use flow::FlowNetwork;
pub use optimize::{
    cluster_undirected, optimize, optimize_restarts, optimize_with_trace, OptimizeOutcome,
    RestartSummary,
};

pub const PARTITION_HEADER: [&str; 2] = ["node", "module"];

#[derive(Debug, Error)]
pub enum MapEqError {
    #[error("network has no nodes")]
    EmptyNetwork,
    #[error("teleport probability must lie in (0, 1), got {0}")]
    InvalidTeleport(f64),
    #[error("power iteration did not converge (residual {})", .0.residual)]
    NoConvergence(VisitDistribution),
    #[error("partition covers {got} nodes, network has {expected}")]
    IncompletePartition { expected: usize, got: usize },
    #[error("partition file: {0}")]
    Format(String),
}

pub fn plogp(p: f64) -> f64 {
    if p > 0.0 {
        p * p.log2()
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModuleSummary {
    pub size: usize,
    /// Sum of member visit rates.
    pub visit: f64,
    /// Rate at which the walk leaves the module.
    pub exit: f64,
}

/// Node-to-module assignment with its codelength.
///
/// Module ids are canonical: numbered `0..k` in order of each module's
/// lowest-index member.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Partition {
    assignment: Vec<usize>,
    modules: Vec<ModuleSummary>,
    codelength: f64,
}

/// Relabels module ids to `0..k` by first appearance.
pub fn canonical_labels(assignment: &[usize]) -> Vec<usize> {
    let mut map = BTreeMap::new();
    assignment
        .iter()
        .map(|m| {
            let next = map.len();
            *map.entry(*m).or_insert(next)
        })
        .collect()
}

pub(crate) fn codelength_from_modules(
    modules: impl Iterator<Item = (f64, f64)>,
    node_entropy_term: f64,
) -> f64 {
    let (mut exit_sum, mut exit_terms, mut total_terms) = (0.0, 0.0, 0.0);
    for (exit, visit) in modules {
        exit_sum += exit;
        exit_terms += plogp(exit);
        total_terms += plogp(exit + visit);
    }
    plogp(exit_sum) - 2.0 * exit_terms - node_entropy_term + total_terms
}

fn module_summaries(assignment: &[usize], fnet: &FlowNetwork) -> Vec<ModuleSummary> {
    let n = fnet.node_count();
    let k = assignment.iter().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; k];
    let mut visit = vec![0.0; k];
    let mut teleport = vec![0.0; k];
    let mut link_exit = vec![0.0; k];
    for u in 0..n {
        let m = assignment[u];
        sizes[m] += 1;
        visit[m] += fnet.visits[u];
        teleport[m] += fnet.teleport_mass[u];
        for &(v, f) in &fnet.out_links[u] {
            if assignment[v] != m {
                link_exit[m] += f;
            }
        }
    }
    (0..k)
        .filter(|&m| sizes[m] > 0)
        .map(|m| ModuleSummary {
            size: sizes[m],
            visit: visit[m],
            exit: teleport[m] * (n - sizes[m]) as f64 / n as f64 + link_exit[m],
        })
        .collect()
}

fn node_entropy_term(fnet: &FlowNetwork) -> f64 {
    fnet.visits.iter().map(|&p| plogp(p)).sum()
}

/// Map-equation codelength of `assignment` (module id per node), computed from scratch.
pub fn codelength(
    assignment: &[usize],
    flow: &VisitDistribution,
    g: &Digraph,
) -> Result<f64, MapEqError> {
    Ok(Partition::evaluate(assignment, flow, g)?.codelength)
}

impl Partition {
    pub fn evaluate(
        assignment: &[usize],
        flow: &VisitDistribution,
        g: &Digraph,
    ) -> Result<Partition, MapEqError> {
        let n = g.node_count();
        if assignment.len() != n || flow.visits.len() != n {
            return Err(MapEqError::IncompletePartition {
                expected: n,
                got: assignment.len(),
            });
        }
        Ok(Self::from_flow(assignment, &FlowNetwork::new(g, flow)))
    }

    pub(crate) fn from_flow(assignment: &[usize], fnet: &FlowNetwork) -> Partition {
        let assignment = canonical_labels(assignment);
        let modules = module_summaries(&assignment, fnet);
        let codelength = codelength_from_modules(
            modules.iter().map(|m| (m.exit, m.visit)),
            node_entropy_term(fnet),
        );
        Partition {
            assignment,
            modules,
            codelength,
        }
    }

    /// Partition assembled from an assignment and precomputed summaries.
    pub(crate) fn from_raw(
        assignment: Vec<usize>,
        modules: Vec<ModuleSummary>,
        codelength: f64,
    ) -> Partition {
        Partition {
            assignment,
            modules,
            codelength,
        }
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn module_of(&self, node: usize) -> usize {
        self.assignment[node]
    }

    pub fn module_count(&self) -> usize {
        self.modules.len()
    }

    pub fn modules(&self) -> &[ModuleSummary] {
        &self.modules
    }

    pub fn codelength(&self) -> f64 {
        self.codelength
    }

    pub fn node_count(&self) -> usize {
        self.assignment.len()
    }

    pub fn members(&self, module: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&u| self.assignment[u] == module)
            .collect()
    }

    /// `node,module` rows using `labels[i]` as the name of node `i`.
    pub fn write_csv<W: Write>(&self, labels: &[String], out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(PARTITION_HEADER)?;
        for (label, m) in labels.iter().zip(&self.assignment) {
            w.write_record([label.as_str(), &m.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Reads a `node,module` file into a label → module map.
pub fn read_partition_csv<R: Read>(input: R) -> Result<BTreeMap<String, usize>, MapEqError> {
    let fmt = |e: csv::Error| MapEqError::Format(e.to_string());
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers().map_err(fmt)?.clone();
    if headers.iter().collect::<Vec<_>>() != PARTITION_HEADER {
        return Err(MapEqError::Format("expected header node,module".into()));
    }
    let mut map = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(fmt)?;
        let module = rec[1]
            .parse()
            .map_err(|_| MapEqError::Format(format!("bad module id `{}`", &rec[1])))?;
        if map.insert(rec[0].to_owned(), module).is_some() {
            return Err(MapEqError::Format(format!("node `{}` listed twice", &rec[0])));
        }
    }
    Ok(map)
}

/// Adjusted Rand index between two labelings of the same nodes.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings must cover the same nodes");
    let pairs = |x: u64| (x * x.saturating_sub(1) / 2) as f64;
    let mut table: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    let mut rows: BTreeMap<usize, u64> = BTreeMap::new();
    let mut cols: BTreeMap<usize, u64> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_insert(0) += 1;
        *rows.entry(x).or_insert(0) += 1;
        *cols.entry(y).or_insert(0) += 1;
    }
    let index: f64 = table.values().map(|&c| pairs(c)).sum();
    let row_sum: f64 = rows.values().map(|&c| pairs(c)).sum();
    let col_sum: f64 = cols.values().map(|&c| pairs(c)).sum();
    let total = pairs(a.len() as u64);
    if total == 0.0 {
        return 1.0;
    }
    let expected = row_sum * col_sum / total;
    let max = 0.5 * (row_sum + col_sum);
    if max == expected {
        return 1.0;
    }
    (index - expected) / (max - expected)
}
