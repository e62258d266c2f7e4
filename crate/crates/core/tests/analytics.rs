mod common;

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use shipflow::analytics::{
    flow_report, match_clusters, remove_edges, remove_top_degree, top_inter_cluster_edges, vessel_type_stats,
    PeriodClustering,
};
use shipflow::ingest::{VesselType, VoyageLeg};
use shipflow::sfn::{network_stats, EdgeData, SpeciesFlowNetwork};

fn random_network(seed: u64, n: usize, density: f64) -> SpeciesFlowNetwork {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in 0..n {
            if u != v && rng.gen_bool(density) {
                edges.push((
                    format!("N{u:02}"),
                    format!("N{v:02}"),
                    EdgeData {
                        weight: rng.gen_range(0.01..1.0),
                        voyages: rng.gen_range(1..5),
                    },
                ));
            }
        }
    }
    SpeciesFlowNetwork::from_parts((0..n).map(|u| format!("N{u:02}")), edges).unwrap()
}

fn random_modules(seed: u64, n: usize, k: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    (0..n).map(|_| rng.gen_range(0..k)).collect()
}

#[test]
fn flow_report_matches_hand_summation() {
    for seed in 0..20 {
        let net = random_network(seed, 15, 0.3);
        let modules = random_modules(seed, 15, 4);
        let report = flow_report(&net, &modules, 15).unwrap();
        let edges: Vec<(usize, usize, f64)> = net.edges().map(|(u, v, d)| (u, v, d.weight)).collect();
        let total: f64 = edges.iter().map(|e| e.2).sum();
        for m in &report.modules {
            let intra: f64 = edges
                .iter()
                .filter(|e| modules[e.0] == m.module && modules[e.1] == m.module)
                .map(|e| e.2)
                .sum();
            let out: f64 = edges
                .iter()
                .filter(|e| modules[e.0] == m.module && modules[e.1] != m.module)
                .map(|e| e.2)
                .sum();
            let inn: f64 = edges
                .iter()
                .filter(|e| modules[e.0] != m.module && modules[e.1] == m.module)
                .map(|e| e.2)
                .sum();
            assert!((m.intra - intra).abs() < 1e-12);
            assert!((m.inter_out - out).abs() < 1e-12);
            assert!((m.inter_in - inn).abs() < 1e-12);
            for p in &m.ports_by_total_flow {
                let u = net.index_of(&p.port).unwrap();
                let incident: f64 = edges.iter().filter(|e| e.0 == u || e.1 == u).map(|e| e.2).sum();
                assert!((p.percent_total_flow - 100.0 * incident / (2.0 * total)).abs() < 1e-9);
            }
            let ranks: Vec<f64> = m.ports_by_cluster_flow.iter().map(|p| p.percent_cluster_flow).collect();
            assert!(ranks.windows(2).all(|w| w[0] >= w[1]));
        }
        for pair in &report.pairs {
            let flow: f64 = edges
                .iter()
                .filter(|e| modules[e.0] == pair.from && modules[e.1] == pair.to)
                .map(|e| e.2)
                .sum();
            assert!((pair.flow - flow).abs() < 1e-12);
        }
    }
}

#[test]
fn inter_cluster_ranking_matches_sort_oracle() {
    for seed in 0..20 {
        let net = random_network(seed, 12, 0.4);
        let modules = random_modules(seed, 12, 3);
        let ranking = top_inter_cluster_edges(&net, &modules, 8).unwrap();
        let mut oracle: Vec<(f64, String, String)> = net
            .edges()
            .filter(|(u, v, _)| modules[*u] != modules[*v])
            .map(|(u, v, d)| (d.weight, net.nodes()[u].clone(), net.nodes()[v].clone()))
            .collect();
        oracle.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then((&a.1, &a.2).cmp(&(&b.1, &b.2))));
        oracle.truncate(8);
        let got: Vec<(f64, String, String)> = ranking
            .edges
            .iter()
            .map(|e| (e.weight, e.origin.clone(), e.dest.clone()))
            .collect();
        assert_eq!(got, oracle);
        for c in &ranking.contributors {
            assert!(c.share > 0.0 && c.share <= 1.0);
        }
    }
}

#[test]
fn removing_a_bridge_zeroes_inter_flow() {
    let edges = [("A", "B", 0.4), ("B", "A", 0.3), ("C", "D", 0.2), ("D", "C", 0.6), ("B", "C", 0.05)];
    let net = SpeciesFlowNetwork::from_parts(
        [],
        edges.iter().map(|&(a, b, w)| {
            (a.to_owned(), b.to_owned(), EdgeData { weight: w, voyages: 1 })
        }),
    )
    .unwrap();
    let modules = [0, 0, 1, 1];
    let r = remove_edges(&net, &[("B".into(), "C".into())], Some(&modules)).unwrap();
    assert_eq!(r.inter_cluster_flow_before, Some(0.05));
    assert_eq!(r.inter_cluster_flow_after, Some(0.0));
    assert!((r.flow_removed - 0.05).abs() < 1e-15);
}

#[test]
fn removing_nothing_changes_nothing() {
    let net = random_network(3, 20, 0.2);
    let r = remove_edges(&net, &[], None).unwrap();
    assert_eq!(r.before, r.after);
    assert_eq!(r.flow_removed, 0.0);
    assert_eq!(r.unreachable_delta, 0);
}

#[test]
fn removing_top_inter_edges_removes_their_weight() {
    for seed in 0..10 {
        let net = random_network(seed, 14, 0.35);
        let modules = random_modules(seed, 14, 3);
        let ranking = top_inter_cluster_edges(&net, &modules, 5).unwrap();
        let list: Vec<(String, String)> =
            ranking.edges.iter().map(|e| (e.origin.clone(), e.dest.clone())).collect();
        let expected: f64 = ranking.edges.iter().map(|e| e.weight).sum();
        let r = remove_edges(&net, &list, Some(&modules)).unwrap();
        assert!((r.flow_removed - expected).abs() < 1e-12);
        let before = r.inter_cluster_flow_before.unwrap();
        let after = r.inter_cluster_flow_after.unwrap();
        assert!((before - after - expected).abs() < 1e-12);
        assert!(r.missing_edges.is_empty());
    }
}

#[test]
fn star_hub_removal_leaves_no_edges() {
    let mut edges = Vec::new();
    for leaf in ["A", "B", "C", "D", "E"] {
        edges.push(("HUB".to_owned(), leaf.to_owned(), EdgeData { weight: 0.1, voyages: 1 }));
        edges.push((leaf.to_owned(), "HUB".to_owned(), EdgeData { weight: 0.1, voyages: 1 }));
    }
    let net = SpeciesFlowNetwork::from_parts([], edges).unwrap();
    let r = remove_top_degree(&net, 0.1).unwrap();
    assert_eq!(r.removed_nodes, vec!["HUB"]);
    assert_eq!(r.after.edges, 0);
    assert_eq!(r.after.average_path_length, None);
    assert_eq!(r.after.unreachable_pairs, 30);
}

fn leg(t: VesselType, a: &str, b: &str) -> VoyageLeg {
    let d = chrono::NaiveDate::from_ymd_opt(2006, 3, 1).unwrap();
    VoyageLeg {
        vessel_id: "V".into(),
        vessel_type: t,
        dwt: 1000.0,
        origin: a.into(),
        dest: b.into(),
        depart: d,
        arrive: d,
    }
}

#[test]
fn vessel_stats_match_brute_force_tally() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let ports: Vec<String> = (0..10).map(|i| format!("P{i}")).collect();
    let modules: BTreeMap<String, usize> = ports.iter().take(9).map(|p| (p.clone(), rng.gen_range(0..3))).collect();
    let legs: Vec<VoyageLeg> = (0..400)
        .map(|_| {
            let t = VesselType::ALL[rng.gen_range(0..4)];
            let a = &ports[rng.gen_range(0..10)];
            let b = &ports[rng.gen_range(0..10)];
            leg(t, a, b)
        })
        .collect();
    let report = vessel_type_stats(&legs, &modules);

    let mut tally: BTreeMap<VesselType, (usize, usize)> = BTreeMap::new();
    let mut unassigned = 0;
    for l in &legs {
        match (modules.get(&l.origin), modules.get(&l.dest)) {
            (Some(a), Some(b)) => {
                let e = tally.entry(l.vessel_type).or_default();
                e.0 += 1;
                if a != b {
                    e.1 += 1;
                }
            }
            _ => unassigned += 1,
        }
    }
    assert_eq!(report.unassigned, unassigned);
    for (t, (trips, inter)) in &tally {
        let s = report.per_type[t];
        assert_eq!((s.trips, s.inter), (*trips, *inter));
        assert!((0.0..=1.0).contains(&s.inter_fraction));
    }
    // trip-weighted type fractions aggregate to the overall fraction
    let weighted: f64 = report.per_type.values().map(|s| s.inter_fraction * s.trips as f64).sum::<f64>()
        / report.overall.trips as f64;
    assert!((weighted - report.overall.inter_fraction).abs() < 1e-12);
}

fn clustering(label: &str, groups: &[&[&str]]) -> PeriodClustering {
    PeriodClustering {
        label: label.into(),
        members: groups
            .iter()
            .enumerate()
            .map(|(c, g)| (c, g.iter().map(|s| s.to_string()).collect()))
            .collect(),
        flow: (0..groups.len()).map(|c| (c, 1.0 + c as f64)).collect(),
    }
}

#[test]
fn disjoint_periods_have_no_matches() {
    let a = clustering("t0", &[&["A", "B"], &["C"]]);
    let b = clustering("t1", &[&["X", "Y"], &["Z"]]);
    let map = match_clusters(&[a, b]).unwrap();
    let t = &map.transitions[0];
    assert!(t.matches.is_empty());
    assert_eq!(t.dead, vec![0, 1]);
    assert_eq!(t.born, vec![0, 1]);
}

#[test]
fn split_parent_follows_larger_half() {
    let a = clustering("t0", &[&["A", "B", "C", "D", "E", "F"]]);
    let b = clustering("t1", &[&["A", "B"], &["C", "D", "E", "F"]]);
    let t = &match_clusters(&[a, b]).unwrap().transitions[0];
    // |{C,D,E,F}| / 6 beats |{A,B}| / 6
    assert_eq!(t.matches, vec![(0, 1, 4.0 / 6.0)]);
    assert_eq!(t.born, vec![0]);
}

fn relabel(p: &PeriodClustering, shift: usize) -> PeriodClustering {
    PeriodClustering {
        label: p.label.clone(),
        members: p.members.iter().map(|(c, m)| (c + shift, m.clone())).collect(),
        flow: p.flow.iter().map(|(c, f)| (c + shift, *f)).collect(),
    }
}

fn network_from(n: usize, edges: &[(usize, usize, f64)]) -> SpeciesFlowNetwork {
    SpeciesFlowNetwork::from_parts(
        (0..n).map(|u| format!("N{u:02}")),
        edges
            .iter()
            .map(|&(u, v, w)| (format!("N{u:02}"), format!("N{v:02}"), EdgeData { weight: w, voyages: 1 })),
    )
    .unwrap()
}

fn edge_set() -> impl Strategy<Value = (usize, Vec<(usize, usize, f64)>)> {
    (3usize..12).prop_flat_map(|n| {
        let edges = proptest::collection::vec((0..n, 0..n, 0.01f64..1.0), 0..40)
            .prop_map(|es| {
                let mut seen = BTreeSet::new();
                es.into_iter()
                    .filter(|&(u, v, _)| u != v && seen.insert((u, v)))
                    .collect::<Vec<_>>()
            });
        (Just(n), edges)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scenarios_only_shrink_the_network((n, edges) in edge_set(), fraction in 0.05f64..0.95, pick in 0usize..40) {
        let net = network_from(n, &edges);
        let listed: Vec<(String, String)> = edges
            .iter()
            .take(pick % (edges.len() + 1))
            .map(|&(u, v, _)| (format!("N{u:02}"), format!("N{v:02}")))
            .collect();
        let results = [
            remove_top_degree(&net, fraction).unwrap(),
            remove_edges(&net, &listed, None).unwrap(),
        ];
        let plain: Vec<(usize, usize)> = net.edges().map(|(u, v, _)| (u, v)).collect();
        let before = common::floyd_warshall(n, &plain);
        for r in &results {
            let after = &r.network;
            prop_assert!(after.edge_count() <= net.edge_count());
            prop_assert!(after.total_weight() <= net.total_weight() + 1e-12);
            for (u, v, d) in after.edges() {
                prop_assert_eq!(net.edge(&after.nodes()[u], &after.nodes()[v]), Some(d));
            }
            let ae: Vec<(usize, usize)> = after.edges().map(|(u, v, _)| (u, v)).collect();
            let dist = common::floyd_warshall(n, &ae);
            for i in 0..n {
                for j in 0..n {
                    if let Some(d) = dist[i][j] {
                        prop_assert!(before[i][j].is_some_and(|b| b <= d));
                    }
                }
            }
            prop_assert_eq!(&network_stats(after).unwrap(), &r.after);
            prop_assert!(r.unreachable_delta >= 0);
        }
    }

    #[test]
    fn flow_report_reconciles((n, edges) in edge_set(), k in 1usize..5, seed in any::<u64>()) {
        let net = network_from(n, &edges);
        let modules = random_modules(seed, n, k);
        let r = flow_report(&net, &modules, 3).unwrap();
        let sum: f64 = r.modules.iter().map(|m| m.intra + m.inter_out).sum();
        prop_assert!((sum - net.total_weight()).abs() <= 1e-9);
    }

    #[test]
    fn matching_ignores_module_labels(
        xs in proptest::collection::vec(0usize..4, 10),
        ys in proptest::collection::vec(0usize..4, 10),
        shift in 1usize..50,
    ) {
        let build = |label: &str, v: &[usize]| {
            let mut members: BTreeMap<usize, BTreeSet<String>> = BTreeMap::new();
            for (i, &c) in v.iter().enumerate() {
                members.entry(c).or_default().insert(format!("P{i}"));
            }
            let flow = members.iter().map(|(&c, m)| (c, m.len() as f64)).collect();
            PeriodClustering { label: label.into(), members, flow }
        };
        let a = build("a", &xs);
        let b = build("b", &ys);
        let plain = match_clusters(&[a.clone(), b.clone()]).unwrap();
        let shifted = match_clusters(&[relabel(&a, shift), relabel(&b, shift)]).unwrap();
        let unshift: Vec<(usize, usize, f64)> = shifted.transitions[0]
            .matches
            .iter()
            .map(|&(x, y, j)| (x - shift, y - shift, j))
            .collect();
        prop_assert_eq!(&plain.transitions[0].matches, &unshift);
    }
}
