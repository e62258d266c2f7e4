//! Acceptance suite. Runs without the libtest harness so every criterion
//! prints exactly one PASS/FAIL line; exits non-zero if any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use shipflow::analytics::{flow_report, remove_top_degree};
use shipflow::ballast::fit_discharge_models;
use shipflow::graph::Digraph;
use shipflow::ingest::synthetic::{generate_synthetic, scale_free_voyages, ClusterSpec, DischargeLaw};
use shipflow::ingest::{EcoregionAdjacency, PortRecord, VesselType};
use shipflow::mapeq::{adjusted_rand_index, optimize, stationary_flow};
use shipflow::risk::{build_risk_network, risk_level, sub_cluster, TOLERANCE_GROUPS};
use shipflow::sfn::{
    aggregate_edge_weight, build_sfn, calibrate_lambda, introduction_probability, network_stats, FlowParams,
    SpeciesFlowNetwork, DEFAULT_MORTALITY,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, format!("took {elapsed:?}, limit {limit:?}"))
}

fn lambda_calibration() -> Outcome {
    let start = Instant::now();
    let lambda = calibrate_lambda(500_000.0, 0.8).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let p = 1.0 - (-lambda * 500_000.0).exp();
    ensure((p - 0.8).abs() <= 1e-12, format!("1 - exp(-500000 lambda) = {p}"))?;
    // an extra independent anchor: lambda = ln 5 / 500000
    ensure(
        (lambda - 5f64.ln() / 500_000.0).abs() <= 1e-12 * lambda,
        format!("lambda = {lambda}"),
    )?;
    within(elapsed, Duration::from_millis(1))?;
    Ok(format!("lambda = {lambda:.6e}, |p - 0.8| = {:.1e}, {elapsed:?}", (p - 0.8).abs()))
}

fn probability_oracle() -> Outcome {
    let lambda = calibrate_lambda(500_000.0, 0.8).unwrap();
    let mu = DEFAULT_MORTALITY;
    let p_of = |d: f64, t: f64, r: f64| introduction_probability(d, t, r, lambda, mu).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_agg = 0.0f64;
    let mut worst_fd = 0.0f64;
    for i in 0..1000 {
        let d: f64 = rng.gen_range(100.0..1_000_000.0);
        let t: f64 = rng.gen_range(0.5..60.0);
        let r: f64 = rng.gen_range(0.01..0.99);
        let p = p_of(d, t, r);
        let k = rng.gen_range(1..=25);
        let agg = aggregate_edge_weight(&vec![p; k]);
        let expected = 1.0 - (1.0 - p).powi(k as i32);
        worst_agg = worst_agg.max((agg - expected).abs());
        ensure(
            (agg - expected).abs() <= 1e-12,
            format!("tuple {i}: k={k} aggregate {agg} vs {expected}"),
        )?;

        // central differences against the closed-form partial derivatives
        let decay = (-mu * t).exp();
        let analytic = [
            r * lambda * (-lambda * d).exp() * decay,
            -mu * p,
            (1.0 - (-lambda * d).exp()) * decay,
        ];
        let hd = 1e-6 * d;
        let ht = 1e-6 * t;
        let hr = 1e-6;
        let numeric = [
            (p_of(d + hd, t, r) - p_of(d - hd, t, r)) / (2.0 * hd),
            (p_of(d, t + ht, r) - p_of(d, t - ht, r)) / (2.0 * ht),
            (p_of(d, t, r + hr) - p_of(d, t, r - hr)) / (2.0 * hr),
        ];
        let signs = [1.0, -1.0, 1.0];
        for j in 0..3 {
            ensure(
                numeric[j] * signs[j] > 0.0,
                format!("tuple {i}: derivative {j} has wrong sign ({})", numeric[j]),
            )?;
            let rel = ((numeric[j] - analytic[j]) / analytic[j]).abs();
            worst_fd = worst_fd.max(rel);
            ensure(rel <= 1e-4, format!("tuple {i}: derivative {j} relative error {rel:.2e}"))?;
        }
    }
    Ok(format!(
        "1000 tuples, max aggregate error {worst_agg:.1e}, max derivative error {worst_fd:.1e}"
    ))
}

fn optimality_small_graphs() -> Outcome {
    let start = Instant::now();
    let mut matches = 0;
    let mut worst_gap = 0.0f64;
    for seed in 0..100u64 {
        let n = 4 + (seed as usize % 5);
        let g = common::random_digraph(seed, n, 0.3);
        let flow = stationary_flow(&g, 0.15).map_err(|e| e.to_string())?;
        let (min, _) = common::exhaustive_minimum(&g, &flow);
        let found = optimize(&g, &flow, seed).map_err(|e| e.to_string())?.codelength();
        ensure(
            found >= min - 1e-9,
            format!("seed {seed}: optimizer {found} beats exhaustive minimum {min}"),
        )?;
        if found <= min + 1e-9 {
            matches += 1;
        }
        worst_gap = worst_gap.max(found - min);
    }
    let elapsed = start.elapsed();
    ensure(matches >= 95, format!("matched the exhaustive minimum in {matches}/100"))?;
    within(elapsed, Duration::from_secs(60))?;
    Ok(format!("{matches}/100 at the exhaustive minimum, max gap {worst_gap:.1e} bits, {elapsed:?}"))
}

/// Two dense directed 20-node clusters joined by two bridge edges.
fn planted_pair(seed: u64) -> (Digraph, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for c in 0..2 {
        let base = 20 * c;
        for u in 0..20 {
            for v in 0..20 {
                if u != v && rng.gen_bool(0.5) {
                    edges.push((base + u, base + v, rng.gen_range(0.1..1.0)));
                }
            }
        }
    }
    let a = rng.gen_range(0..20);
    let b = rng.gen_range(20..40);
    edges.push((a, b, rng.gen_range(0.1..1.0)));
    edges.push((rng.gen_range(20..40), rng.gen_range(0..20), rng.gen_range(0.1..1.0)));
    let truth = (0..40).map(|u| u / 20).collect();
    (Digraph::from_edges(40, edges), truth)
}

fn planted_recovery() -> Outcome {
    let start = Instant::now();
    let mut aris = Vec::new();
    for seed in 0..10u64 {
        let (g, truth) = planted_pair(seed);
        let flow = stationary_flow(&g, 0.15).map_err(|e| e.to_string())?;
        let p = optimize(&g, &flow, seed).map_err(|e| e.to_string())?;
        let ari = adjusted_rand_index(p.assignment(), &truth);
        ensure(ari == 1.0, format!("seed {seed}: ARI {ari} with {} modules", p.module_count()))?;
        aris.push(ari);
    }
    let elapsed = start.elapsed();
    within(elapsed, Duration::from_secs(5))?;
    Ok(format!("ARI 1.0 on {} seeds, {elapsed:?}", aris.len()))
}

/// Links per new port in the scale-free fixture. With 2 the remainder after
/// hub removal shatters into tiny components whose short paths pull the
/// finite-pair average down; 3 and above keep a large connected core.
const SCALE_FREE_ATTACH: usize = 4;

fn scale_free_network(seed: u64) -> SpeciesFlowNetwork {
    let (ports, legs) = scale_free_voyages(seed, 500, SCALE_FREE_ATTACH).unwrap();
    let events: Vec<_> = VesselType::ALL
        .iter()
        .flat_map(|&t| {
            [(10_000.0, 600.0), (90_000.0, 4_600.0)].map(|(dwt, m3)| shipflow::ingest::DischargeEvent {
                vessel_type: t,
                dwt,
                discharge: m3,
            })
        })
        .collect();
    let model = fit_discharge_models(&events).unwrap();
    let ids: Vec<String> = ports.iter().map(|p| p.port_id.clone()).collect();
    build_sfn(&legs, &model, &FlowParams::default(), &ids).unwrap()
}

fn path_length_scenario() -> Outcome {
    let start = Instant::now();
    let mut lines = Vec::new();
    for seed in [7u64, 8, 9] {
        let net = scale_free_network(seed);
        let result = remove_top_degree(&net, 0.2).map_err(|e| e.to_string())?;

        let before_apl = result.before.average_path_length.ok_or("no finite paths before")?;
        let after_apl = result.after.average_path_length.ok_or("no finite paths after")?;
        ensure(
            after_apl > before_apl,
            format!("seed {seed}: average path length {before_apl} -> {after_apl}"),
        )?;
        ensure(
            result.after.unreachable_pairs > result.before.unreachable_pairs,
            format!(
                "seed {seed}: unreachable pairs {} -> {}",
                result.before.unreachable_pairs, result.after.unreachable_pairs
            ),
        )?;

        let after = &result.network;
        let edges: Vec<(usize, usize)> = after.edges().map(|(u, v, _)| (u, v)).collect();
        let (mean, diameter, reach, unreachable) = common::bfs_oracle(after.node_count(), &edges);
        let stats = network_stats(after).map_err(|e| e.to_string())?;
        ensure(stats == result.after, "recomputed after-stats differ from the scenario's")?;
        ensure(
            result.after.average_path_length == mean
                && result.after.diameter.map(u64::from) == diameter
                && result.after.reachable_pairs == reach
                && result.after.unreachable_pairs == unreachable
                && result.after.edges == edges.len(),
            format!(
                "seed {seed}: after-stats {:?} vs oracle ({mean:?}, {diameter:?}, {reach}, {unreachable})",
                result.after
            ),
        )?;
        lines.push(format!(
            "{before_apl:.2} -> {after_apl:.2} (unreachable {} -> {})",
            result.before.unreachable_pairs, result.after.unreachable_pairs
        ));
    }
    let elapsed = start.elapsed();
    within(elapsed, Duration::from_secs(30))?;
    Ok(format!("path length {}, {elapsed:?}", lines.join("; ")))
}

/// Brute-force group count: temperature groups tolerating dt times salinity groups tolerating ds.
fn table_count(dt: f64, ds: f64) -> u32 {
    let t = [2.9, 9.7].iter().filter(|&&x| dt <= x).count() as u32;
    let s = [0.2, 2.0, 12.0].iter().filter(|&&x| ds <= x).count() as u32;
    t * s
}

fn port(id: &str, region: &str, t: f64, s: f64) -> PortRecord {
    PortRecord {
        port_id: id.into(),
        name: id.into(),
        lat: 0.0,
        lon: 0.0,
        ecoregion_id: region.into(),
        temperature: Some(t),
        salinity: Some(s),
    }
}

fn risk_grid() -> Outcome {
    let mut values: Vec<f64> = (0..100).map(|i| 15.0 * i as f64 / 99.0).collect();
    values.extend([2.9, 9.7, 0.2, 2.0, 12.0]);
    let mut checked = 0;
    for &dt in &values {
        for &ds in &values {
            let got = risk_level(dt, ds, &TOLERANCE_GROUPS);
            let want = table_count(dt, ds);
            ensure(got == want, format!("dT={dt}, dS={ds}: {got} vs {want}"))?;
            checked += 1;
        }
    }
    // boundaries reached through port environments, where the difference is computed
    let adjacency = EcoregionAdjacency::new();
    let boundaries = [0.2, 2.0, 2.9, 9.7, 12.0];
    for &dt in &boundaries {
        for &ds in &boundaries {
            let ports = [port("A", "R1", 18.3, 7.1), port("B", "R2", 18.3 + dt, 7.1 + ds)];
            let net = build_risk_network(&ports, &adjacency, &TOLERANCE_GROUPS);
            let got = net.edges.first().map_or(0, |e| e.level);
            let want = table_count(dt, ds);
            ensure(got == want, format!("ports with dT={dt}, dS={ds}: {got} vs {want}"))?;
            checked += 1;
        }
    }
    Ok(format!("{checked} (dT, dS) cells agree exactly"))
}

fn regression_recovery() -> Outcome {
    let laws: Vec<DischargeLaw> = (0..VesselType::ALL.len())
        .map(|k| DischargeLaw {
            intercept: 150.0 + 37.5 * k as f64,
            slope: 0.013 * (k + 1) as f64,
        })
        .collect();
    let spec = ClusterSpec {
        discharge_laws: laws.clone(),
        noise: 0.0,
        events_per_type: 30,
        ..ClusterSpec::default()
    };
    let data = generate_synthetic(11, 20, 4, &spec).map_err(|e| e.to_string())?;
    let model = fit_discharge_models(&data.discharges).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for (k, t) in VesselType::ALL.iter().enumerate() {
        let fit = model.per_type.get(t).ok_or(format!("no fit for {t}"))?;
        let law = laws[k];
        let ra = ((fit.intercept - law.intercept) / law.intercept).abs();
        let rb = ((fit.slope - law.slope) / law.slope).abs();
        worst = worst.max(ra).max(rb);
        ensure(ra <= 1e-9 && rb <= 1e-9, format!("{t}: ({}, {}) vs ({}, {})", fit.intercept, fit.slope, law.intercept, law.slope))?;
    }
    Ok(format!("{} types, max relative error {worst:.1e}", VesselType::ALL.len()))
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn run_pipeline(dir: &Path) -> Result<(), String> {
    std::fs::write(
        dir.join("pipeline.cfg"),
        "out = out\nrestarts = 4\nseed = 42\ngen_ports = 30\ngen_sizes = 15,15\ngen_vessels = 24\nperiods = 2005,2005-2006\nrisk_module = 0\n",
    )
    .map_err(|e| e.to_string())?;
    for cmd in ["generate", "build", "cluster", "report", "evolve", "risk", "scenario"] {
        let status = Command::new(env!("CARGO_BIN_EXE_shipflow"))
            .args([cmd, "--config", "pipeline.cfg"])
            .current_dir(dir)
            .output()
            .map_err(|e| e.to_string())?;
        ensure(
            status.status.success(),
            format!("{cmd} failed: {}", String::from_utf8_lossy(&status.stderr)),
        )?;
    }
    Ok(())
}

fn determinism() -> Outcome {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    run_pipeline(a.path())?;
    run_pipeline(b.path())?;
    let fa = files(a.path());
    let fb = files(b.path());
    ensure(
        fa.keys().eq(fb.keys()),
        format!("artifact sets differ: {:?} vs {:?}", fa.keys(), fb.keys()),
    )?;
    for (name, bytes) in &fa {
        ensure(&fb[name] == bytes, format!("{name} differs between runs"))?;
    }
    Ok(format!("{} artifacts byte-identical across two runs", fa.len()))
}

fn flow_reconciliation() -> Outcome {
    let mut fixtures: Vec<(String, SpeciesFlowNetwork, Vec<usize>)> = Vec::new();
    for seed in 0..5u64 {
        let spec = ClusterSpec {
            sizes: vec![8, 12, 10],
            leak: 0.1,
            ..ClusterSpec::default()
        };
        let data = generate_synthetic(seed, 30, 20, &spec).unwrap();
        let model = fit_discharge_models(&data.discharges).unwrap();
        let net = build_sfn(&data.voyages, &model, &FlowParams::default(), &[]).unwrap();
        let planted: Vec<usize> = net.nodes().iter().map(|n| data.membership[n]).collect();
        let g = net.to_digraph();
        let flow = stationary_flow(&g, 0.15).unwrap();
        let found = optimize(&g, &flow, seed).unwrap().assignment().to_vec();
        fixtures.push((format!("synthetic {seed} planted"), net.clone(), planted));
        fixtures.push((format!("synthetic {seed} optimized"), net, found));
    }
    let sf = scale_free_network(7);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let random: Vec<usize> = (0..sf.node_count()).map(|_| rng.gen_range(0..7)).collect();
    fixtures.push(("scale-free random partition".into(), sf.clone(), random));
    fixtures.push(("scale-free one module".into(), sf.clone(), vec![0; sf.node_count()]));
    fixtures.push((
        "scale-free singletons".into(),
        sf.clone(),
        (0..sf.node_count()).collect(),
    ));

    let mut worst = 0.0f64;
    for (name, net, modules) in &fixtures {
        let r = flow_report(net, modules, 5).map_err(|e| format!("{name}: {e}"))?;
        let sum: f64 = r.modules.iter().map(|m| m.intra + m.inter_out).sum();
        let sum_in: f64 = r.modules.iter().map(|m| m.intra + m.inter_in).sum();
        let total = net.total_weight();
        let err = (sum - total).abs().max((sum_in - total).abs()).max((r.intra_flow + r.inter_flow - total).abs());
        worst = worst.max(err);
        ensure(err <= 1e-9, format!("{name}: totals off by {err:.2e}"))?;
    }
    Ok(format!("{} fixtures, max discrepancy {worst:.1e}", fixtures.len()))
}

fn sub_cluster_separation() -> Outcome {
    let mut ports = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for i in 0..12 {
        // fresh water bloc and marine bloc; every port in its own ecoregion
        let (bloc, s) = if i < 6 { ("F", 2.0) } else { ("M", 33.0) };
        let t = 14.0 + rng.gen_range(-2.0..2.0);
        let s = s + rng.gen_range(-0.8..0.8);
        ports.push(port(&format!("{bloc}{i:02}"), &format!("E{i}"), t, s));
    }
    let net = build_risk_network(&ports, &EcoregionAdjacency::new(), &TOLERANCE_GROUPS);
    let subs = sub_cluster(&net, 9).map_err(|e| e.to_string())?;
    let modules = subs.partition.module_count();
    ensure(modules == 2, format!("{modules} sub-clusters"))?;
    let mut bloc_modules: BTreeMap<char, std::collections::BTreeSet<usize>> = BTreeMap::new();
    for (p, &m) in net.ports.iter().zip(subs.partition.assignment()) {
        bloc_modules.entry(p.port_id.chars().next().unwrap()).or_default().insert(m);
    }
    ensure(
        bloc_modules.values().all(|ms| ms.len() == 1) && bloc_modules[&'F'] != bloc_modules[&'M'],
        format!("sub-clusters per bloc: {bloc_modules:?}"),
    )?;
    Ok(format!("2 bloc-pure sub-clusters, {} risk edges", net.edges.len()))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("lambda calibration", lambda_calibration),
        ("introduction probability oracle", probability_oracle),
        ("map equation optimality (n <= 8)", optimality_small_graphs),
        ("planted cluster recovery", planted_recovery),
        ("path length scenario", path_length_scenario),
        ("risk level grid", risk_grid),
        ("regression recovery", regression_recovery),
        ("pipeline determinism", determinism),
        ("flow reconciliation", flow_reconciliation),
        ("sub-cluster separation", sub_cluster_separation),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS [{}] {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL [{}] {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
