use std::collections::BTreeSet;

use serde::Serialize;

use super::AnalyticsError;
use crate::sfn::{network_stats, NetworkStats, SpeciesFlowNetwork};

/// Network characteristics before and after a ballast-management intervention.
#[derive(Debug, Clone, Serialize)]
pub struct ScenarioResult {
    pub description: String,
    pub removed_nodes: Vec<String>,
    pub removed_edges: usize,
    /// Requested edges that were not in the network.
    pub missing_edges: Vec<(String, String)>,
    pub flow_removed: f64,
    pub before: NetworkStats,
    pub after: NetworkStats,
    pub unreachable_delta: i64,
    pub inter_cluster_flow_before: Option<f64>,
    pub inter_cluster_flow_after: Option<f64>,
    /// The network after the intervention; same node set as the input.
    #[serde(skip)]
    pub network: SpeciesFlowNetwork,
}

fn inter_flow(net: &SpeciesFlowNetwork, modules: &[usize]) -> f64 {
    net.edges()
        .filter(|(u, v, _)| modules[*u] != modules[*v])
        .map(|(_, _, d)| d.weight)
        .sum()
}

fn finish(
    description: String,
    net: &SpeciesFlowNetwork,
    after: SpeciesFlowNetwork,
    removed_nodes: Vec<String>,
    missing_edges: Vec<(String, String)>,
    modules: Option<&[usize]>,
) -> Result<ScenarioResult, AnalyticsError> {
    let before_stats = network_stats(net)?;
    let after_stats = network_stats(&after)?;
    Ok(ScenarioResult {
        description,
        removed_nodes,
        removed_edges: net.edge_count() - after.edge_count(),
        missing_edges,
        flow_removed: net.total_weight() - after.total_weight(),
        unreachable_delta: after_stats.unreachable_pairs as i64 - before_stats.unreachable_pairs as i64,
        before: before_stats,
        after: after_stats,
        inter_cluster_flow_before: modules.map(|m| inter_flow(net, m)),
        inter_cluster_flow_after: modules.map(|m| inter_flow(&after, m)),
        network: after,
    })
}

/// Drops every edge incident to the `ceil(fraction * n)` nodes of highest
/// total degree (ties broken by port id). The nodes themselves stay.
pub fn remove_top_degree(net: &SpeciesFlowNetwork, fraction: f64) -> Result<ScenarioResult, AnalyticsError> {
    let n = net.node_count();
    if n == 0 {
        return Err(AnalyticsError::EmptyNetwork);
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(AnalyticsError::InvalidFraction(fraction));
    }
    let mut degree = vec![0usize; n];
    for (u, v, _) in net.edges() {
        degree[u] += 1;
        degree[v] += 1;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| degree[b].cmp(&degree[a]).then_with(|| net.nodes()[a].cmp(&net.nodes()[b])));
    let count = ((fraction * n as f64).ceil() as usize).min(n);
    let removed: BTreeSet<usize> = order[..count].iter().copied().collect();
    let after = net.retain_edges(|u, v, _| !removed.contains(&u) && !removed.contains(&v));
    finish(
        format!("remove edges of top {:.1}% of ports by degree ({count} ports)", fraction * 100.0),
        net,
        after,
        order[..count].iter().map(|&u| net.nodes()[u].clone()).collect(),
        Vec::new(),
        None,
    )
}

/// Drops the listed directed edges. Unknown edges are reported, not fatal.
pub fn remove_edges(
    net: &SpeciesFlowNetwork,
    edges: &[(String, String)],
    modules: Option<&[usize]>,
) -> Result<ScenarioResult, AnalyticsError> {
    if net.node_count() == 0 {
        return Err(AnalyticsError::EmptyNetwork);
    }
    if let Some(m) = modules {
        super::check(net, m)?;
    }
    let mut drop = BTreeSet::new();
    let mut missing = Vec::new();
    for (a, b) in edges {
        match (net.index_of(a), net.index_of(b)) {
            (Some(u), Some(v)) if net.edge(a, b).is_some() => {
                drop.insert((u, v));
            }
            _ => missing.push((a.clone(), b.clone())),
        }
    }
    let after = net.retain_edges(|u, v, _| !drop.contains(&(u, v)));
    finish(
        format!("remove {} listed edges", drop.len()),
        net,
        after,
        Vec::new(),
        missing,
        modules,
    )
}
