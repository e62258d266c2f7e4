use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::AnalyticsError;
use crate::sfn::SpeciesFlowNetwork;

/// Clusters of one time period: module id → member ports, plus intra flow.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodClustering {
    pub label: String,
    pub members: BTreeMap<usize, BTreeSet<String>>,
    pub flow: BTreeMap<usize, f64>,
}

impl PeriodClustering {
    /// Members from `modules` (aligned with `net.nodes()`), flow = intra-module weight.
    pub fn from_network(
        label: impl Into<String>,
        net: &SpeciesFlowNetwork,
        modules: &[usize],
    ) -> Result<Self, AnalyticsError> {
        super::check(net, modules)?;
        let mut members: BTreeMap<usize, BTreeSet<String>> = BTreeMap::new();
        let mut flow: BTreeMap<usize, f64> = BTreeMap::new();
        for (u, name) in net.nodes().iter().enumerate() {
            members.entry(modules[u]).or_default().insert(name.clone());
            flow.entry(modules[u]).or_insert(0.0);
        }
        for (u, v, d) in net.edges() {
            if modules[u] == modules[v] {
                *flow.get_mut(&modules[u]).unwrap() += d.weight;
            }
        }
        Ok(PeriodClustering {
            label: label.into(),
            members,
            flow,
        })
    }

    fn ports(&self) -> BTreeSet<&str> {
        self.members.values().flatten().map(String::as_str).collect()
    }

    fn flow_of(&self, c: usize) -> f64 {
        self.flow.get(&c).copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchRef {
    pub period: String,
    pub cluster: usize,
    pub jaccard: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterView {
    pub cluster: usize,
    /// 1-based rank by descending flow.
    pub rank: usize,
    pub flow: f64,
    pub size: usize,
    pub members_hash: String,
    pub matches: Vec<MatchRef>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodView {
    pub period: String,
    pub clusters: Vec<ClusterView>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Transition {
    pub from: String,
    pub to: String,
    pub shared_ports: usize,
    /// (cluster in `from`, cluster in `to`, shared members) for non-empty overlaps.
    pub overlap: Vec<(usize, usize, usize)>,
    pub matches: Vec<(usize, usize, f64)>,
    pub born: Vec<usize>,
    pub dead: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvolutionMap {
    pub periods: Vec<PeriodView>,
    pub transitions: Vec<Transition>,
}

fn members_hash(members: &BTreeSet<String>) -> String {
    let mut h = Sha256::new();
    for m in members {
        h.update(m.as_bytes());
        h.update(b"\n");
    }
    hex::encode(&h.finalize()[..8])
}

/// Jaccard index of two clusters restricted to `shared`.
fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>, shared: &BTreeSet<&str>) -> f64 {
    let a: BTreeSet<&str> = a.iter().map(String::as_str).filter(|p| shared.contains(p)).collect();
    let b: BTreeSet<&str> = b.iter().map(String::as_str).filter(|p| shared.contains(p)).collect();
    let union = a.union(&b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(&b).count() as f64 / union as f64
}

fn transition(a: &PeriodClustering, b: &PeriodClustering) -> Transition {
    let pa = a.ports();
    let shared: BTreeSet<&str> = b.ports().into_iter().filter(|p| pa.contains(p)).collect();

    let mut overlap = Vec::new();
    let mut candidates = Vec::new();
    for (&ca, ma) in &a.members {
        for (&cb, mb) in &b.members {
            let common = ma.intersection(mb).count();
            if common > 0 {
                overlap.push((ca, cb, common));
                candidates.push((ca, cb, jaccard(ma, mb, &shared)));
            }
        }
    }
    candidates.sort_by(|x, y| {
        y.2.total_cmp(&x.2)
            .then_with(|| {
                let fx = a.flow_of(x.0) + b.flow_of(x.1);
                let fy = a.flow_of(y.0) + b.flow_of(y.1);
                fy.total_cmp(&fx)
            })
            .then((x.0, x.1).cmp(&(y.0, y.1)))
    });

    let mut used_a = BTreeSet::new();
    let mut used_b = BTreeSet::new();
    let mut matches = Vec::new();
    for (ca, cb, j) in candidates {
        if j > 0.0 && !used_a.contains(&ca) && !used_b.contains(&cb) {
            used_a.insert(ca);
            used_b.insert(cb);
            matches.push((ca, cb, j));
        }
    }
    matches.sort_by_key(|m| (m.0, m.1));
    Transition {
        from: a.label.clone(),
        to: b.label.clone(),
        shared_ports: shared.len(),
        overlap,
        matches,
        born: b.members.keys().filter(|c| !used_b.contains(c)).copied().collect(),
        dead: a.members.keys().filter(|c| !used_a.contains(c)).copied().collect(),
    }
}

/// Greedy one-to-one matching of clusters between consecutive periods.
pub fn match_clusters(periods: &[PeriodClustering]) -> Result<EvolutionMap, AnalyticsError> {
    if periods.len() < 2 {
        return Err(AnalyticsError::TooFewPeriods);
    }
    let transitions: Vec<Transition> = periods.windows(2).map(|w| transition(&w[0], &w[1])).collect();

    let views = periods
        .iter()
        .enumerate()
        .map(|(t, p)| {
            let mut order: Vec<usize> = p.members.keys().copied().collect();
            order.sort_by(|&x, &y| p.flow_of(y).total_cmp(&p.flow_of(x)).then(x.cmp(&y)));
            let rank: BTreeMap<usize, usize> = order.iter().enumerate().map(|(r, &c)| (c, r + 1)).collect();
            let clusters = p
                .members
                .iter()
                .map(|(&c, members)| {
                    let mut matches = Vec::new();
                    if t > 0 {
                        for &(ca, cb, j) in &transitions[t - 1].matches {
                            if cb == c {
                                matches.push(MatchRef {
                                    period: periods[t - 1].label.clone(),
                                    cluster: ca,
                                    jaccard: j,
                                });
                            }
                        }
                    }
                    if t + 1 < periods.len() {
                        for &(ca, cb, j) in &transitions[t].matches {
                            if ca == c {
                                matches.push(MatchRef {
                                    period: periods[t + 1].label.clone(),
                                    cluster: cb,
                                    jaccard: j,
                                });
                            }
                        }
                    }
                    ClusterView {
                        cluster: c,
                        rank: rank[&c],
                        flow: p.flow_of(c),
                        size: members.len(),
                        members_hash: members_hash(members),
                        matches,
                    }
                })
                .collect();
            PeriodView {
                period: p.label.clone(),
                clusters,
            }
        })
        .collect();

    Ok(EvolutionMap {
        periods: views,
        transitions,
    })
}
