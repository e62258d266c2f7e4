//! Cluster-level views of a species flow network: flow decomposition, port
//! rankings, vessel-type trip statistics, cluster evolution across periods and
//! ballast-management scenarios.

mod evolution;
mod scenario;

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::ingest::{VesselType, VoyageLeg};
use crate::sfn::{SfnError, SpeciesFlowNetwork};

pub use evolution::{match_clusters, ClusterView, EvolutionMap, MatchRef, PeriodClustering, Transition};
pub use scenario::{remove_edges, remove_top_degree, ScenarioResult};

#[derive(Debug, Error, PartialEq)]
pub enum AnalyticsError {
    #[error("partition does not match network: {0}")]
    PartitionMismatch(String),
    #[error("need at least two periods")]
    TooFewPeriods,
    #[error("network has no nodes")]
    EmptyNetwork,
    #[error("fraction must lie in (0, 1), got {0}")]
    InvalidFraction(f64),
    #[error(transparent)]
    Stats(#[from] SfnError),
}

/// Module id of every network node, looked up by port id.
pub fn assignment_for(
    net: &SpeciesFlowNetwork,
    modules: &BTreeMap<String, usize>,
) -> Result<Vec<usize>, AnalyticsError> {
    net.nodes()
        .iter()
        .map(|n| {
            modules
                .get(n)
                .copied()
                .ok_or_else(|| AnalyticsError::PartitionMismatch(format!("port `{n}` unassigned")))
        })
        .collect()
}

fn check(net: &SpeciesFlowNetwork, modules: &[usize]) -> Result<(), AnalyticsError> {
    if modules.len() != net.node_count() {
        return Err(AnalyticsError::PartitionMismatch(format!(
            "{} assignments for {} nodes",
            modules.len(),
            net.node_count()
        )));
    }
    Ok(())
}

pub const PORT_SHARE_DEFINITION: &str = "port %TF = (incoming + outgoing edge weight) / (2 * total flow) * 100; \
port %CF = (incoming + outgoing weight on edges inside the module) / (2 * module intra flow) * 100";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PortShare {
    pub port: String,
    pub percent_total_flow: f64,
    pub percent_cluster_flow: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModuleFlow {
    pub module: usize,
    pub size: usize,
    pub intra: f64,
    pub inter_out: f64,
    pub inter_in: f64,
    /// Intra-module flow as a percentage of total flow.
    pub percent_total_flow: f64,
    pub ports_by_total_flow: Vec<PortShare>,
    pub ports_by_cluster_flow: Vec<PortShare>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairFlow {
    pub from: usize,
    pub to: usize,
    pub flow: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterFlowReport {
    pub total_flow: f64,
    pub intra_flow: f64,
    pub inter_flow: f64,
    pub port_share_definition: &'static str,
    /// Modules ordered by descending intra flow.
    pub modules: Vec<ModuleFlow>,
    /// Flow aggregated per ordered module pair, including `from == to`.
    pub pairs: Vec<PairFlow>,
}

fn percent(part: f64, whole: f64) -> f64 {
    if whole > 0.0 {
        100.0 * part / whole
    } else {
        0.0
    }
}

fn rank_desc<T>(items: &mut [T], key: impl Fn(&T) -> f64, tie: impl Fn(&T) -> String) {
    items.sort_by(|a, b| key(b).total_cmp(&key(a)).then_with(|| tie(a).cmp(&tie(b))));
}

/// Intra/inter flow per module plus top-`top_k` port rankings.
pub fn flow_report(
    net: &SpeciesFlowNetwork,
    modules: &[usize],
    top_k: usize,
) -> Result<ClusterFlowReport, AnalyticsError> {
    check(net, modules)?;
    let n = net.node_count();
    let k = modules.iter().max().map_or(0, |m| m + 1);
    let mut intra = vec![0.0; k];
    let mut out = vec![0.0; k];
    let mut inn = vec![0.0; k];
    let mut size = vec![0usize; k];
    let mut incident = vec![0.0; n];
    let mut incident_intra = vec![0.0; n];
    let mut pairs: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for &m in modules {
        size[m] += 1;
    }
    for (u, v, d) in net.edges() {
        let (a, b) = (modules[u], modules[v]);
        incident[u] += d.weight;
        incident[v] += d.weight;
        if a == b {
            intra[a] += d.weight;
            incident_intra[u] += d.weight;
            incident_intra[v] += d.weight;
        } else {
            out[a] += d.weight;
            inn[b] += d.weight;
        }
        *pairs.entry((a, b)).or_insert(0.0) += d.weight;
    }
    let total = net.total_weight();

    let mut report_modules: Vec<ModuleFlow> = (0..k)
        .filter(|&m| size[m] > 0)
        .map(|m| {
            let shares: Vec<PortShare> = (0..n)
                .filter(|&u| modules[u] == m)
                .map(|u| PortShare {
                    port: net.nodes()[u].clone(),
                    percent_total_flow: percent(incident[u], 2.0 * total),
                    percent_cluster_flow: percent(incident_intra[u], 2.0 * intra[m]),
                })
                .collect();
            let mut by_total = shares.clone();
            rank_desc(&mut by_total, |s| s.percent_total_flow, |s| s.port.clone());
            by_total.truncate(top_k);
            let mut by_cluster = shares;
            rank_desc(&mut by_cluster, |s| s.percent_cluster_flow, |s| s.port.clone());
            by_cluster.truncate(top_k);
            ModuleFlow {
                module: m,
                size: size[m],
                intra: intra[m],
                inter_out: out[m],
                inter_in: inn[m],
                percent_total_flow: percent(intra[m], total),
                ports_by_total_flow: by_total,
                ports_by_cluster_flow: by_cluster,
            }
        })
        .collect();
    report_modules.sort_by(|a, b| b.intra.total_cmp(&a.intra).then(a.module.cmp(&b.module)));

    Ok(ClusterFlowReport {
        total_flow: total,
        intra_flow: intra.iter().sum(),
        inter_flow: out.iter().sum(),
        port_share_definition: PORT_SHARE_DEFINITION,
        modules: report_modules,
        pairs: pairs
            .into_iter()
            .map(|((from, to), flow)| PairFlow { from, to, flow })
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InterEdge {
    pub origin: String,
    pub dest: String,
    pub from_module: usize,
    pub to_module: usize,
    pub weight: f64,
    /// Fraction of all inter-cluster flow carried by this edge.
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModuleContributor {
    pub module: usize,
    pub port: String,
    pub inter_flow: f64,
    /// Fraction of the module's inter-cluster flow (in + out) incident to this port.
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InterClusterRanking {
    pub inter_flow: f64,
    pub edges: Vec<InterEdge>,
    pub contributors: Vec<ModuleContributor>,
}

/// The `k` heaviest edges between different modules and, per module, the
/// port with the largest inter-cluster incident flow.
pub fn top_inter_cluster_edges(
    net: &SpeciesFlowNetwork,
    modules: &[usize],
    k: usize,
) -> Result<InterClusterRanking, AnalyticsError> {
    check(net, modules)?;
    let names = net.nodes();
    let mut edges: Vec<InterEdge> = net
        .edges()
        .filter(|(u, v, _)| modules[*u] != modules[*v])
        .map(|(u, v, d)| InterEdge {
            origin: names[u].clone(),
            dest: names[v].clone(),
            from_module: modules[u],
            to_module: modules[v],
            weight: d.weight,
            share: 0.0,
        })
        .collect();
    let inter_flow: f64 = edges.iter().map(|e| e.weight).sum();
    for e in &mut edges {
        e.share = if inter_flow > 0.0 { e.weight / inter_flow } else { 0.0 };
    }
    rank_desc(&mut edges, |e| e.weight, |e| format!("{}\u{0}{}", e.origin, e.dest));

    let mut port_inter = vec![0.0; net.node_count()];
    let mut module_inter: BTreeMap<usize, f64> = BTreeMap::new();
    for (u, v, d) in net.edges() {
        if modules[u] != modules[v] {
            port_inter[u] += d.weight;
            port_inter[v] += d.weight;
            *module_inter.entry(modules[u]).or_insert(0.0) += d.weight;
            *module_inter.entry(modules[v]).or_insert(0.0) += d.weight;
        }
    }
    let contributors = module_inter
        .iter()
        .map(|(&m, &flow)| {
            let best = (0..net.node_count())
                .filter(|&u| modules[u] == m)
                .fold(None::<usize>, |best, u| match best {
                    Some(b) if port_inter[b] >= port_inter[u] => Some(b),
                    _ => Some(u),
                })
                .expect("module with inter flow has members");
            ModuleContributor {
                module: m,
                port: names[best].clone(),
                inter_flow: port_inter[best],
                share: port_inter[best] / flow,
            }
        })
        .collect();

    edges.truncate(k);
    Ok(InterClusterRanking {
        inter_flow,
        edges,
        contributors,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct TripStats {
    pub trips: usize,
    pub inter: usize,
    pub inter_fraction: f64,
}

impl TripStats {
    fn add(&mut self, inter: bool) {
        self.trips += 1;
        self.inter += inter as usize;
        self.inter_fraction = self.inter as f64 / self.trips as f64;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VesselTypeReport {
    pub per_type: BTreeMap<VesselType, TripStats>,
    pub overall: TripStats,
    /// Legs with an endpoint outside the partition; excluded from the counts.
    pub unassigned: usize,
}

/// Trip counts and inter-cluster fraction per vessel type.
pub fn vessel_type_stats(legs: &[VoyageLeg], modules: &BTreeMap<String, usize>) -> VesselTypeReport {
    let mut per_type: BTreeMap<VesselType, TripStats> = BTreeMap::new();
    let mut overall = TripStats::default();
    let mut unassigned = 0;
    for leg in legs {
        match (modules.get(&leg.origin), modules.get(&leg.dest)) {
            (Some(a), Some(b)) => {
                per_type.entry(leg.vessel_type).or_default().add(a != b);
                overall.add(a != b);
            }
            _ => unassigned += 1,
        }
    }
    VesselTypeReport {
        per_type,
        overall,
        unassigned,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sfn::EdgeData;
    use chrono::NaiveDate;

    pub(crate) fn network(edges: &[(&str, &str, f64)]) -> SpeciesFlowNetwork {
        SpeciesFlowNetwork::from_parts(
            [],
            edges.iter().map(|&(a, b, w)| {
                (
                    a.to_owned(),
                    b.to_owned(),
                    EdgeData {
                        weight: w,
                        voyages: 1,
                    },
                )
            }),
        )
        .unwrap()
    }

    fn two_triangles(bridge: f64) -> SpeciesFlowNetwork {
        network(&[
            ("A", "B", 0.5),
            ("B", "C", 0.4),
            ("C", "A", 0.6),
            ("D", "E", 0.2),
            ("E", "F", 0.9),
            ("F", "D", 0.1),
            ("C", "D", bridge),
        ])
    }

    #[test]
    fn single_module_report() {
        let net = two_triangles(0.3);
        let r = flow_report(&net, &[0; 6], 3).unwrap();
        assert_eq!(r.modules.len(), 1);
        assert_eq!(r.inter_flow, 0.0);
        assert!((r.modules[0].intra - net.total_weight()).abs() < 1e-12);
        assert!((r.modules[0].percent_total_flow - 100.0).abs() < 1e-9);
    }

    #[test]
    fn bridge_is_the_inter_flow() {
        let net = two_triangles(0.3);
        let modules = [0, 0, 0, 1, 1, 1];
        let r = flow_report(&net, &modules, 3).unwrap();
        assert!((r.inter_flow - 0.3).abs() < 1e-12);
        let sum: f64 = r.modules.iter().map(|m| m.intra + m.inter_out).sum();
        assert!((sum - r.total_flow).abs() < 1e-9);
        // module 0 has intra 1.5, module 1 has 1.2
        assert_eq!(r.modules[0].module, 0);
        assert!((r.modules[0].inter_out - 0.3).abs() < 1e-12);
        assert!((r.modules[1].inter_in - 0.3).abs() < 1e-12);
        // C: incident 0.4 + 0.6 + 0.3
        let c = r.modules[0]
            .ports_by_total_flow
            .iter()
            .find(|p| p.port == "C")
            .unwrap();
        assert!((c.percent_total_flow - 100.0 * 1.3 / (2.0 * 3.0)).abs() < 1e-9);
        assert!((c.percent_cluster_flow - 100.0 * 1.0 / 3.0).abs() < 1e-9);
        assert_eq!(r.modules[0].ports_by_total_flow[0].port, "C");
    }

    #[test]
    fn mismatched_partition() {
        let net = two_triangles(0.3);
        assert!(matches!(
            flow_report(&net, &[0; 5], 3),
            Err(AnalyticsError::PartitionMismatch(_))
        ));
        let map = BTreeMap::from([("A".to_owned(), 0)]);
        assert!(assignment_for(&net, &map).is_err());
    }

    #[test]
    fn single_bridge_ranked_first() {
        let net = two_triangles(0.3);
        let r = top_inter_cluster_edges(&net, &[0, 0, 0, 1, 1, 1], 5).unwrap();
        assert_eq!(r.edges.len(), 1);
        assert_eq!((r.edges[0].origin.as_str(), r.edges[0].dest.as_str()), ("C", "D"));
        assert_eq!(r.edges[0].share, 1.0);
        assert_eq!(r.contributors.len(), 2);
        assert_eq!(r.contributors[0].port, "C");
        assert_eq!(r.contributors[0].share, 1.0);
    }

    #[test]
    fn star_port_carries_all_bridges() {
        let net = network(&[
            ("H", "A", 0.1),
            ("A", "H", 0.2),
            ("H", "X1", 0.3),
            ("H", "X2", 0.4),
            ("X3", "H", 0.5),
            ("X4", "H", 0.6),
            ("X1", "X2", 0.7),
            ("X3", "X4", 0.8),
        ]);
        // nodes sorted: A, H, X1, X2, X3, X4
        let r = top_inter_cluster_edges(&net, &[0, 0, 1, 1, 2, 2], 2).unwrap();
        assert_eq!(r.edges.len(), 2);
        assert_eq!(r.edges[0].weight, 0.6);
        assert_eq!(r.edges[1].weight, 0.5);
        let hub = r.contributors.iter().find(|c| c.module == 0).unwrap();
        assert_eq!(hub.port, "H");
        assert!((hub.share - 1.0).abs() < 1e-12);
        assert!((r.inter_flow - 1.8).abs() < 1e-12);
    }

    fn leg(t: VesselType, a: &str, b: &str) -> VoyageLeg {
        let d = NaiveDate::from_ymd_opt(2005, 1, 1).unwrap();
        VoyageLeg {
            vessel_id: "V".into(),
            vessel_type: t,
            dwt: 1.0,
            origin: a.into(),
            dest: b.into(),
            depart: d,
            arrive: d,
        }
    }

    #[test]
    fn vessel_fractions() {
        let modules: BTreeMap<String, usize> =
            [("A", 0), ("B", 0), ("C", 1)].iter().map(|&(k, v)| (k.to_owned(), v)).collect();
        let mut legs = Vec::new();
        for _ in 0..3 {
            legs.push(leg(VesselType::Container, "A", "C"));
        }
        for _ in 0..7 {
            legs.push(leg(VesselType::Container, "A", "B"));
        }
        legs.push(leg(VesselType::Passenger, "B", "A"));
        legs.push(leg(VesselType::Passenger, "B", "Z"));
        let r = vessel_type_stats(&legs, &modules);
        assert_eq!(r.per_type[&VesselType::Container].trips, 10);
        assert!((r.per_type[&VesselType::Container].inter_fraction - 0.3).abs() < 1e-12);
        assert_eq!(r.per_type[&VesselType::Passenger].inter_fraction, 0.0);
        assert_eq!(r.unassigned, 1);
        assert_eq!(r.overall.trips, 11);
        assert_eq!(r.overall.inter, 3);

        let one: BTreeMap<String, usize> =
            ["A", "B", "C"].iter().map(|k| (k.to_string(), 0)).collect();
        let r = vessel_type_stats(&legs, &one);
        assert!(r.per_type.values().all(|s| s.inter_fraction == 0.0));
    }
}
