//! Species Flow Network: per-voyage introduction probabilities aggregated into
//! directed port-to-port edge weights, plus whole-network statistics.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ballast::{least_squares, DischargeModel};
use crate::graph::Digraph;
use crate::ingest::VoyageLeg;

pub const DEFAULT_REFERENCE_VOLUME: f64 = 500_000.0;
pub const DEFAULT_REFERENCE_PROBABILITY: f64 = 0.8;
pub const DEFAULT_MORTALITY: f64 = 0.02;
pub const DEFAULT_EDGE_FLOOR: f64 = 1e-12;

pub const EDGES_HEADER: [&str; 4] = ["origin", "dest", "weight", "voyage_count"];

#[derive(Debug, Error, PartialEq)]
pub enum SfnError {
    #[error("{name} out of range: {value}")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("network has no nodes")]
    EmptyNetwork,
    #[error("invalid edge {origin} -> {dest}: {reason}")]
    InvalidEdge {
        origin: String,
        dest: String,
        reason: String,
    },
    #[error("edge list: {0}")]
    Format(String),
}

fn out_of_range(name: &'static str, value: f64) -> SfnError {
    SfnError::OutOfRange { name, value }
}

/// Discharge constant such that a discharge of `reference_volume` carries
/// introduction probability `reference_probability` with no mortality and no management.
pub fn calibrate_lambda(reference_volume: f64, reference_probability: f64) -> Result<f64, SfnError> {
    if !(reference_volume > 0.0 && reference_volume.is_finite()) {
        return Err(out_of_range("reference_volume", reference_volume));
    }
    if !(reference_probability > 0.0 && reference_probability < 1.0) {
        return Err(out_of_range("reference_probability", reference_probability));
    }
    Ok(-(-reference_probability).ln_1p() / reference_volume)
}

/// Probability that one voyage introduces species:
/// `efficacy * (1 - exp(-lambda * discharge)) * exp(-mortality * days)`.
pub fn introduction_probability(
    discharge: f64,
    duration_days: f64,
    efficacy: f64,
    lambda: f64,
    mortality: f64,
) -> Result<f64, SfnError> {
    let nonneg = |name, v: f64| {
        if v >= 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(out_of_range(name, v))
        }
    };
    nonneg("discharge", discharge)?;
    nonneg("duration_days", duration_days)?;
    nonneg("lambda", lambda)?;
    nonneg("mortality", mortality)?;
    if !(0.0..=1.0).contains(&efficacy) {
        return Err(out_of_range("efficacy", efficacy));
    }
    let uptake = -(-lambda * discharge).exp_m1();
    Ok(efficacy * uptake * (-mortality * duration_days).exp())
}

/// Combined probability that at least one of several independent voyages introduces species.
pub fn aggregate_edge_weight(probabilities: &[f64]) -> f64 {
    let mut ps = probabilities.to_vec();
    ps.sort_by(f64::total_cmp);
    let log_survival: f64 = ps.iter().map(|&p| (-p.clamp(0.0, 1.0)).ln_1p()).sum();
    (-log_survival.exp_m1()).clamp(0.0, 1.0)
}

/// Ballast-management efficacy per route; routes not listed use `default`.
#[derive(Debug, Clone, PartialEq)]
pub struct EfficacyPolicy {
    pub default: f64,
    pub routes: BTreeMap<(String, String), f64>,
}

impl Default for EfficacyPolicy {
    fn default() -> Self {
        EfficacyPolicy {
            default: 1.0,
            routes: BTreeMap::new(),
        }
    }
}

impl EfficacyPolicy {
    pub fn uniform(default: f64) -> Self {
        EfficacyPolicy {
            default,
            routes: BTreeMap::new(),
        }
    }

    pub fn efficacy(&self, origin: &str, dest: &str) -> f64 {
        self.routes
            .get(&(origin.to_owned(), dest.to_owned()))
            .copied()
            .unwrap_or(self.default)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowParams {
    pub lambda: f64,
    pub mortality: f64,
    pub efficacy: EfficacyPolicy,
    pub edge_floor: f64,
}

impl Default for FlowParams {
    fn default() -> Self {
        FlowParams {
            lambda: calibrate_lambda(DEFAULT_REFERENCE_VOLUME, DEFAULT_REFERENCE_PROBABILITY)
                .expect("default calibration is in range"),
            mortality: DEFAULT_MORTALITY,
            efficacy: EfficacyPolicy::default(),
            edge_floor: DEFAULT_EDGE_FLOOR,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeData {
    pub weight: f64,
    pub voyages: usize,
}

/// Directed port graph; node indices follow the sorted port ids.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeciesFlowNetwork {
    nodes: Vec<String>,
    index: BTreeMap<String, usize>,
    edges: BTreeMap<(usize, usize), EdgeData>,
    params: Option<FlowParams>,
}

impl SpeciesFlowNetwork {
    /// Assembles a network from explicit edges; every endpoint is added as a node.
    pub fn from_parts(
        nodes: impl IntoIterator<Item = String>,
        edges: impl IntoIterator<Item = (String, String, EdgeData)>,
    ) -> Result<Self, SfnError> {
        let edges: Vec<_> = edges.into_iter().collect();
        let mut set: BTreeSet<String> = nodes.into_iter().collect();
        for (a, b, _) in &edges {
            set.insert(a.clone());
            set.insert(b.clone());
        }
        let nodes: Vec<String> = set.into_iter().collect();
        let index: BTreeMap<String, usize> =
            nodes.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        let mut map = BTreeMap::new();
        for (a, b, data) in edges {
            let bad = |reason: &str| SfnError::InvalidEdge {
                origin: a.clone(),
                dest: b.clone(),
                reason: reason.to_owned(),
            };
            if a == b {
                return Err(bad("self-loop"));
            }
            if !(data.weight > 0.0 && data.weight <= 1.0) {
                return Err(bad("weight outside (0, 1]"));
            }
            if map.insert((index[&a], index[&b]), data).is_some() {
                return Err(bad("duplicate edge"));
            }
        }
        Ok(SpeciesFlowNetwork {
            nodes,
            index,
            edges: map,
            params: None,
        })
    }

    pub fn params(&self) -> Option<&FlowParams> {
        self.params.as_ref()
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn index_of(&self, port: &str) -> Option<usize> {
        self.index.get(port).copied()
    }

    pub fn edge(&self, origin: &str, dest: &str) -> Option<&EdgeData> {
        self.edges
            .get(&(self.index_of(origin)?, self.index_of(dest)?))
    }

    /// Edges as `(origin index, dest index, data)` in index order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, &EdgeData)> + '_ {
        self.edges.iter().map(|(&(u, v), d)| (u, v, d))
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.values().map(|e| e.weight).sum()
    }

    pub fn to_digraph(&self) -> Digraph {
        Digraph::from_edges(
            self.node_count(),
            self.edges().map(|(u, v, d)| (u, v, d.weight)),
        )
    }

    /// Same node set, keeping only edges for which `keep` is true.
    pub fn retain_edges(&self, mut keep: impl FnMut(usize, usize, &EdgeData) -> bool) -> Self {
        SpeciesFlowNetwork {
            nodes: self.nodes.clone(),
            index: self.index.clone(),
            edges: self
                .edges
                .iter()
                .filter(|(&(u, v), d)| keep(u, v, d))
                .map(|(&k, &d)| (k, d))
                .collect(),
            params: self.params.clone(),
        }
    }

    pub fn write_edge_list<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(EDGES_HEADER)?;
        for (u, v, d) in self.edges() {
            w.write_record([
                self.nodes[u].as_str(),
                &self.nodes[v],
                &d.weight.to_string(),
                &d.voyages.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// One `node` column listing every node, including ones without edges.
    pub fn write_node_list<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["node"])?;
        for n in &self.nodes {
            w.write_record([n])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_edge_list<R: Read>(input: R, extra_nodes: Vec<String>) -> Result<Self, SfnError> {
        let fmt = |e: csv::Error| SfnError::Format(e.to_string());
        let mut rdr = csv::Reader::from_reader(input);
        let headers = rdr.headers().map_err(fmt)?.clone();
        if headers.iter().collect::<Vec<_>>() != EDGES_HEADER {
            return Err(SfnError::Format(format!(
                "expected header {}",
                EDGES_HEADER.join(",")
            )));
        }
        let mut edges = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(fmt)?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            let bad = |what: &str| SfnError::Format(format!("line {line}: bad {what}"));
            let weight: f64 = rec[2].parse().map_err(|_| bad("weight"))?;
            let voyages: usize = rec[3].parse().map_err(|_| bad("voyage_count"))?;
            edges.push((
                rec[0].to_owned(),
                rec[1].to_owned(),
                EdgeData { weight, voyages },
            ));
        }
        Self::from_parts(extra_nodes, edges)
    }

    pub fn read_node_list<R: Read>(input: R) -> Result<Vec<String>, SfnError> {
        let mut rdr = csv::Reader::from_reader(input);
        let mut nodes = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| SfnError::Format(e.to_string()))?;
            nodes.push(rec[0].to_owned());
        }
        Ok(nodes)
    }

    pub fn write_graphml<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#)?;
        writeln!(
            out,
            r#"<graphml xmlns="http://graphml.graphdrawing.org/xmlns">"#
        )?;
        writeln!(
            out,
            r#"  <key id="weight" for="edge" attr.name="weight" attr.type="double"/>"#
        )?;
        writeln!(
            out,
            r#"  <key id="voyages" for="edge" attr.name="voyage_count" attr.type="int"/>"#
        )?;
        writeln!(out, r#"  <graph id="sfn" edgedefault="directed">"#)?;
        for n in &self.nodes {
            writeln!(out, r#"    <node id="{}"/>"#, xml_escape(n))?;
        }
        for (u, v, d) in self.edges() {
            writeln!(
                out,
                r#"    <edge source="{}" target="{}"><data key="weight">{}</data><data key="voyages">{}</data></edge>"#,
                xml_escape(&self.nodes[u]),
                xml_escape(&self.nodes[v]),
                d.weight,
                d.voyages
            )?;
        }
        writeln!(out, "  </graph>")?;
        writeln!(out, "</graphml>")
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Builds the network from voyage legs. `extra_nodes` registers ports that
/// should appear even without any leg.
pub fn build_sfn(
    legs: &[VoyageLeg],
    model: &DischargeModel,
    params: &FlowParams,
    extra_nodes: &[String],
) -> Result<SpeciesFlowNetwork, SfnError> {
    let mut routes: BTreeMap<(&str, &str), Vec<f64>> = BTreeMap::new();
    let mut nodes: BTreeSet<String> = extra_nodes.iter().cloned().collect();
    for leg in legs {
        nodes.insert(leg.origin.clone());
        nodes.insert(leg.dest.clone());
        let days = leg.duration_days();
        if days < 0 {
            return Err(out_of_range("duration_days", days as f64));
        }
        let p = introduction_probability(
            model.predict(leg.vessel_type, leg.dwt),
            days as f64,
            params.efficacy.efficacy(&leg.origin, &leg.dest),
            params.lambda,
            params.mortality,
        )?;
        routes.entry((&leg.origin, &leg.dest)).or_default().push(p);
    }
    let edges: Vec<_> = routes
        .into_iter()
        .filter_map(|((a, b), ps)| {
            let weight = aggregate_edge_weight(&ps);
            (weight >= params.edge_floor && weight > 0.0).then(|| {
                (
                    a.to_owned(),
                    b.to_owned(),
                    EdgeData {
                        weight,
                        voyages: ps.len(),
                    },
                )
            })
        })
        .collect();
    let mut net = SpeciesFlowNetwork::from_parts(nodes, edges)?;
    net.params = Some(params.clone());
    Ok(net)
}

/// Whole-network characteristics on the unweighted directed graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkStats {
    pub nodes: usize,
    pub edges: usize,
    /// Mean hop distance over ordered pairs that are reachable; `None` when no pair is.
    pub average_path_length: Option<f64>,
    pub diameter: Option<u32>,
    pub reachable_pairs: u64,
    pub unreachable_pairs: u64,
    pub average_in_degree: f64,
    pub average_out_degree: f64,
    pub density: f64,
}

pub fn network_stats(net: &SpeciesFlowNetwork) -> Result<NetworkStats, SfnError> {
    digraph_stats(&net.to_digraph())
}

pub fn digraph_stats(g: &Digraph) -> Result<NetworkStats, SfnError> {
    let n = g.node_count();
    if n == 0 {
        return Err(SfnError::EmptyNetwork);
    }
    let m = g.edge_count();
    // (sum of distances, reachable count, max distance) per source
    let per_source: Vec<(u64, u64, u32)> = (0..n)
        .into_par_iter()
        .map(|s| {
            g.bfs(s)
                .into_iter()
                .enumerate()
                .filter(|&(t, _)| t != s)
                .filter_map(|(_, d)| d)
                .fold((0u64, 0u64, 0u32), |(sum, cnt, mx), d| {
                    (sum + d as u64, cnt + 1, mx.max(d))
                })
        })
        .collect();
    let total: u64 = per_source.iter().map(|x| x.0).sum();
    let reachable: u64 = per_source.iter().map(|x| x.1).sum();
    let diameter = per_source.iter().map(|x| x.2).max().filter(|_| reachable > 0);
    let pairs = (n as u64) * (n as u64 - 1);
    let avg_degree = m as f64 / n as f64;
    Ok(NetworkStats {
        nodes: n,
        edges: m,
        average_path_length: (reachable > 0).then(|| total as f64 / reachable as f64),
        diameter,
        reachable_pairs: reachable,
        unreachable_pairs: pairs - reachable,
        average_in_degree: avg_degree,
        average_out_degree: avg_degree,
        density: if pairs > 0 { m as f64 / pairs as f64 } else { 0.0 },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeDistribution {
    /// Total degree (in + out) → number of nodes.
    pub histogram: BTreeMap<usize, usize>,
    /// Least-squares slope of log density against log degree over
    /// logarithmic bins; `None` with fewer than two occupied bins.
    pub log_log_slope: Option<f64>,
}

pub fn degree_distribution(net: &SpeciesFlowNetwork) -> Result<DegreeDistribution, SfnError> {
    digraph_degree_distribution(&net.to_digraph())
}

pub fn digraph_degree_distribution(g: &Digraph) -> Result<DegreeDistribution, SfnError> {
    let n = g.node_count();
    if n == 0 {
        return Err(SfnError::EmptyNetwork);
    }
    let indeg = g.in_degrees();
    let mut histogram = BTreeMap::new();
    for (u, d) in indeg.iter().enumerate() {
        *histogram.entry(d + g.out_degree(u)).or_insert(0) += 1;
    }
    // bins [2^k, 2^(k+1)), density normalised by bin width
    let mut bins: BTreeMap<u32, usize> = BTreeMap::new();
    for (&deg, &count) in &histogram {
        if deg > 0 {
            *bins.entry(deg.ilog2()).or_insert(0) += count;
        }
    }
    let points: Vec<(f64, f64)> = bins
        .iter()
        .map(|(&k, &count)| {
            let width = 2f64.powi(k as i32);
            let center = width * std::f64::consts::SQRT_2;
            (center.ln(), (count as f64 / width).ln())
        })
        .collect();
    Ok(DegreeDistribution {
        histogram,
        log_log_slope: least_squares(&points).map(|f| f.slope),
    })
}
