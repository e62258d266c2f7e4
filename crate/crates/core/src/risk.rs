//! Invasion risk between ports of one flow cluster: non-indigenous exchange
//! status from ecoregions, risk levels from environmental tolerance groups,
//! and environmental sub-clusters of the resulting risk network.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;
use thiserror::Error;

use crate::ingest::{EcoregionAdjacency, PortRecord};
use crate::mapeq::{cluster_undirected, MapEqError, Partition};

#[derive(Debug, Error)]
pub enum RiskError {
    #[error("port `{0}` has no ecoregion")]
    MissingEcoregion(String),
    #[error("port `{0}` lacks temperature or salinity")]
    MissingEnvironment(String),
    #[error("risk network has no ports")]
    EmptyNetwork,
    #[error(transparent)]
    Clustering(#[from] MapEqError),
}

/// Largest temperature (°C) and salinity (ppt) differences a species group survives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ToleranceGroup {
    pub max_dt: f64,
    pub max_ds: f64,
}

/// Two temperature tolerances crossed with three salinity tolerances.
pub const TOLERANCE_GROUPS: [ToleranceGroup; 6] = [
    ToleranceGroup { max_dt: 2.9, max_ds: 0.2 },
    ToleranceGroup { max_dt: 2.9, max_ds: 2.0 },
    ToleranceGroup { max_dt: 2.9, max_ds: 12.0 },
    ToleranceGroup { max_dt: 9.7, max_ds: 0.2 },
    ToleranceGroup { max_dt: 9.7, max_ds: 2.0 },
    ToleranceGroup { max_dt: 9.7, max_ds: 12.0 },
];

/// True when the two ports sit in different, non-contiguous ecoregions.
pub fn non_indigenous_pair(
    a: &PortRecord,
    b: &PortRecord,
    adjacency: &EcoregionAdjacency,
) -> Result<bool, RiskError> {
    for p in [a, b] {
        if p.ecoregion_id.trim().is_empty() {
            return Err(RiskError::MissingEcoregion(p.port_id.clone()));
        }
    }
    Ok(a.ecoregion_id != b.ecoregion_id && !adjacency.contiguous(&a.ecoregion_id, &b.ecoregion_id))
}

/// Bit `k` is set when group `k` tolerates both differences (bounds inclusive).
pub fn groups_at_risk(dt: f64, ds: f64, groups: &[ToleranceGroup]) -> u32 {
    groups
        .iter()
        .enumerate()
        .filter(|(_, g)| dt <= g.max_dt && ds <= g.max_ds)
        .fold(0, |mask, (k, _)| mask | (1 << k))
}

/// Number of tolerance groups that survive a transfer with these differences.
pub fn risk_level(dt: f64, ds: f64, groups: &[ToleranceGroup]) -> u32 {
    groups_at_risk(dt, ds, groups).count_ones()
}

/// Absolute difference snapped to 1e-9 so that values such as `28.5 - 25.6`
/// compare as the decimal they represent.
fn difference(a: f64, b: f64) -> f64 {
    ((a - b).abs() * 1e9).round() / 1e9
}

/// Risk level and group mask for a transfer between two ports' environments.
pub fn port_risk(a: &PortRecord, b: &PortRecord, groups: &[ToleranceGroup]) -> Result<(u32, u32), RiskError> {
    let env = |p: &PortRecord| {
        p.environment()
            .ok_or_else(|| RiskError::MissingEnvironment(p.port_id.clone()))
    };
    let ((ta, sa), (tb, sb)) = (env(a)?, env(b)?);
    let mask = groups_at_risk(difference(ta, tb), difference(sa, sb), groups);
    Ok((mask.count_ones(), mask))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RiskEdge {
    pub a: usize,
    pub b: usize,
    pub level: u32,
    pub groups_mask: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CoverageReport {
    pub ports: usize,
    pub missing_environment: Vec<String>,
    pub missing_ecoregion: Vec<String>,
}

/// Undirected risk graph over a port set; ports are held in id order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskNetwork {
    pub ports: Vec<PortRecord>,
    pub edges: Vec<RiskEdge>,
    pub coverage: CoverageReport,
}

/// Links every pair of ports in different, non-contiguous ecoregions whose
/// environmental differences put at least one tolerance group at risk.
/// Ports without an ecoregion or without both environment values get no
/// edges and are listed in the coverage report.
pub fn build_risk_network(
    ports: &[PortRecord],
    adjacency: &EcoregionAdjacency,
    groups: &[ToleranceGroup],
) -> RiskNetwork {
    let mut ports = ports.to_vec();
    ports.sort_by(|a, b| a.port_id.cmp(&b.port_id));
    let mut coverage = CoverageReport {
        ports: ports.len(),
        ..CoverageReport::default()
    };
    for p in &ports {
        if p.ecoregion_id.trim().is_empty() {
            coverage.missing_ecoregion.push(p.port_id.clone());
        }
        if p.environment().is_none() {
            coverage.missing_environment.push(p.port_id.clone());
        }
    }
    let mut edges = Vec::new();
    for i in 0..ports.len() {
        for j in (i + 1)..ports.len() {
            let (a, b) = (&ports[i], &ports[j]);
            if !non_indigenous_pair(a, b, adjacency).unwrap_or(false) {
                continue;
            }
            // ports without environment data are in the coverage report
            let Ok((_, mask)) = port_risk(a, b, groups) else {
                continue;
            };
            if mask != 0 {
                edges.push(RiskEdge {
                    a: i,
                    b: j,
                    level: mask.count_ones(),
                    groups_mask: mask,
                });
            }
        }
    }
    RiskNetwork {
        ports,
        edges,
        coverage,
    }
}

impl RiskNetwork {
    pub fn port_ids(&self) -> Vec<String> {
        self.ports.iter().map(|p| p.port_id.clone()).collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["port_a", "port_b", "risk_level", "groups_at_risk_bitmask"])?;
        for e in &self.edges {
            w.write_record([
                self.ports[e.a].port_id.as_str(),
                &self.ports[e.b].port_id,
                &e.level.to_string(),
                &e.groups_mask.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubClusterSummary {
    pub subcluster: usize,
    pub size: usize,
    pub mean_temperature: Option<f64>,
    pub mean_salinity: Option<f64>,
    pub ports: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubClustering {
    pub partition: Partition,
    pub summaries: Vec<SubClusterSummary>,
}

impl SubClustering {
    /// `port,subcluster` rows.
    pub fn write_csv<W: Write>(&self, net: &RiskNetwork, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["port", "subcluster"])?;
        for (p, m) in net.ports.iter().zip(self.partition.assignment()) {
            w.write_record([p.port_id.as_str(), &m.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Clusters the risk network with risk levels as edge weights. Ports without
/// any risk edge end up in singleton sub-clusters.
pub fn sub_cluster(net: &RiskNetwork, seed: u64) -> Result<SubClustering, RiskError> {
    if net.ports.is_empty() {
        return Err(RiskError::EmptyNetwork);
    }
    let edges: Vec<(usize, usize, f64)> = net
        .edges
        .iter()
        .map(|e| (e.a, e.b, e.level as f64))
        .collect();
    let partition = cluster_undirected(net.ports.len(), &edges, seed)?;
    let mut groups: BTreeMap<usize, Vec<&PortRecord>> = BTreeMap::new();
    for (p, &m) in net.ports.iter().zip(partition.assignment()) {
        groups.entry(m).or_default().push(p);
    }
    let summaries = groups
        .into_iter()
        .map(|(m, members)| SubClusterSummary {
            subcluster: m,
            size: members.len(),
            mean_temperature: mean(members.iter().filter_map(|p| p.temperature)),
            mean_salinity: mean(members.iter().filter_map(|p| p.salinity)),
            ports: members.iter().map(|p| p.port_id.clone()).collect(),
        })
        .collect();
    Ok(SubClustering {
        partition,
        summaries,
    })
}
