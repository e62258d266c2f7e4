//! Command-line pipeline: `generate → build → cluster → report / evolve / risk / scenario`.
//!
//! Stages communicate through files in the output directory. Every JSON
//! artifact carries the hash of the effective configuration, and each command
//! writes `<command>.manifest.json` with the SHA-256 of everything it wrote.

mod config;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::Datelike;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::analytics::{self, AnalyticsError, PeriodClustering};
use crate::ballast::{fit_discharge_models, BallastError, DischargeModel};
use crate::ingest::synthetic::{generate_synthetic, ClusterSpec, DischargeLaw, SyntheticError};
use crate::ingest::{self, IngestError, VesselType, VoyageLeg};
use crate::mapeq::{optimize_restarts, read_partition_csv, stationary_flow, MapEqError, RestartSummary};
use crate::risk::{build_risk_network, sub_cluster, RiskError, TOLERANCE_GROUPS};
use crate::sfn::{
    build_sfn, calibrate_lambda, degree_distribution, network_stats, EfficacyPolicy, FlowParams, SfnError,
    SpeciesFlowNetwork,
};

pub use config::{period_years, PipelineConfig, KEYS};

pub const EDGES_FILE: &str = "sfn_edges.csv";
pub const NODES_FILE: &str = "sfn_nodes.csv";
pub const PARTITION_FILE: &str = "partition.csv";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("missing input: {}", .0.display())]
    MissingInput(PathBuf),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("empty network: {0}")]
    EmptyNetwork(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::MissingInput(_) => "MissingInput",
            CliError::InvalidConfig(_) => "InvalidConfig",
            CliError::InvalidInput(_) => "InvalidInput",
            CliError::EmptyNetwork(_) => "EmptyNetwork",
            CliError::Numerical(_) => "NumericalFailure",
            CliError::Io(_) => "Io",
        }
    }

    /// 2 for bad inputs or config, 3 for numerical failures, 1 for output I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
            _ => 2,
        }
    }

    pub fn to_json(&self) -> Value {
        json!({ "error": { "kind": self.kind(), "message": self.to_string(), "exit_code": self.exit_code() } })
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        CliError::InvalidInput(e.to_string())
    }
}

impl From<BallastError> for CliError {
    fn from(e: BallastError) -> Self {
        CliError::InvalidInput(e.to_string())
    }
}

impl From<SyntheticError> for CliError {
    fn from(e: SyntheticError) -> Self {
        CliError::InvalidConfig(e.to_string())
    }
}

impl From<SfnError> for CliError {
    fn from(e: SfnError) -> Self {
        match e {
            SfnError::EmptyNetwork => CliError::EmptyNetwork(e.to_string()),
            SfnError::OutOfRange { .. } => CliError::InvalidConfig(e.to_string()),
            _ => CliError::InvalidInput(e.to_string()),
        }
    }
}

impl From<MapEqError> for CliError {
    fn from(e: MapEqError) -> Self {
        match e {
            MapEqError::EmptyNetwork => CliError::EmptyNetwork(e.to_string()),
            MapEqError::NoConvergence(_) => CliError::Numerical(e.to_string()),
            MapEqError::InvalidTeleport(_) => CliError::InvalidConfig(e.to_string()),
            _ => CliError::InvalidInput(e.to_string()),
        }
    }
}

impl From<AnalyticsError> for CliError {
    fn from(e: AnalyticsError) -> Self {
        match e {
            AnalyticsError::Stats(s) => s.into(),
            AnalyticsError::EmptyNetwork => CliError::EmptyNetwork(e.to_string()),
            AnalyticsError::InvalidFraction(_) | AnalyticsError::TooFewPeriods => {
                CliError::InvalidConfig(e.to_string())
            }
            AnalyticsError::PartitionMismatch(_) => CliError::InvalidInput(e.to_string()),
        }
    }
}

impl From<RiskError> for CliError {
    fn from(e: RiskError) -> Self {
        match e {
            RiskError::Clustering(m) => m.into(),
            RiskError::EmptyNetwork => CliError::EmptyNetwork(e.to_string()),
            _ => CliError::InvalidInput(e.to_string()),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(std::io::Error::other(e))
    }
}

#[derive(Debug, Parser)]
#[command(name = "shipflow", version, about = "Species flow networks from shipping voyages")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic planted-cluster dataset to the configured input paths.
    Generate(CommonArgs),
    /// Fit discharge models and build the species flow network.
    Build(CommonArgs),
    /// Map-equation clustering of the network (best of `restarts`).
    Cluster(CommonArgs),
    /// Cluster flow decomposition, inter-cluster rankings and vessel-type statistics.
    Report(CommonArgs),
    /// Track clusters across the configured periods.
    Evolve(CommonArgs),
    /// Environmental risk network and its sub-clusters.
    Risk(CommonArgs),
    /// Path-length effect of removing hub ports' edges and listed edges.
    Scenario(CommonArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub fraction: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub restarts: Option<usize>,
}

impl CommonArgs {
    /// Config file (or defaults) with command-line overrides applied.
    pub fn effective_config(&self) -> Result<PipelineConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            // relative to the working directory, like any other CLI path
            cfg.out = std::path::absolute(o)?;
        }
        if let Some(f) = self.fraction {
            cfg.fraction = f;
        }
        if let Some(t) = self.tau {
            cfg.tau = t;
        }
        if let Some(r) = self.restarts {
            cfg.restarts = r;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Parses arguments, runs the command and returns the process exit code.
/// Errors are printed to stderr as one line of JSON.
pub fn main_with<I: IntoIterator<Item = OsString>>(args: I) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli.command) {
        Ok(_) => 0,
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}

/// Runs one command; returns the artifacts written.
pub fn run(command: &Command) -> Result<Vec<PathBuf>, CliError> {
    let (name, args) = match command {
        Command::Generate(a) => ("generate", a),
        Command::Build(a) => ("build", a),
        Command::Cluster(a) => ("cluster", a),
        Command::Report(a) => ("report", a),
        Command::Evolve(a) => ("evolve", a),
        Command::Risk(a) => ("risk", a),
        Command::Scenario(a) => ("scenario", a),
    };
    let cfg = args.effective_config()?;
    let mut out = Output::new(&cfg)?;
    match command {
        Command::Generate(_) => cmd_generate(&cfg, &mut out)?,
        Command::Build(_) => cmd_build(&cfg, &mut out)?,
        Command::Cluster(_) => cmd_cluster(&cfg, &mut out)?,
        Command::Report(_) => cmd_report(&cfg, &mut out)?,
        Command::Evolve(_) => cmd_evolve(&cfg, &mut out)?,
        Command::Risk(_) => cmd_risk(&cfg, &mut out)?,
        Command::Scenario(_) => cmd_scenario(&cfg, &mut out)?,
    }
    out.finish(name, &cfg)
}

/// Tracks written files for the manifest.
struct Output {
    dir: PathBuf,
    hash: String,
    written: Vec<PathBuf>,
}

impl Output {
    fn new(cfg: &PipelineConfig) -> Result<Self, CliError> {
        let dir = cfg.out_dir();
        std::fs::create_dir_all(&dir)?;
        Ok(Output {
            dir,
            hash: cfg.hash(),
            written: Vec::new(),
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn create(&mut self, path: PathBuf) -> Result<BufWriter<File>, CliError> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let f = File::create(&path)?;
        self.written.push(path);
        Ok(BufWriter::new(f))
    }

    fn file(&mut self, name: &str) -> Result<BufWriter<File>, CliError> {
        self.create(self.path(name))
    }

    /// Writes `body` as pretty JSON with `config_hash` added at the top level.
    fn json(&mut self, name: &str, body: impl Serialize) -> Result<(), CliError> {
        let mut value = serde_json::to_value(body).map_err(std::io::Error::other)?;
        match &mut value {
            Value::Object(map) => {
                map.insert("config_hash".into(), Value::String(self.hash.clone()));
            }
            other => {
                *other = json!({ "config_hash": self.hash, "value": other.take() });
            }
        }
        let mut w = self.file(name)?;
        serde_json::to_writer_pretty(&mut w, &value).map_err(std::io::Error::other)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    fn finish(mut self, command: &str, cfg: &PipelineConfig) -> Result<Vec<PathBuf>, CliError> {
        let mut artifacts = BTreeMap::new();
        for p in &self.written {
            let bytes = std::fs::read(p)?;
            let name = p
                .strip_prefix(&self.dir)
                .map(|r| r.to_string_lossy().into_owned())
                .unwrap_or_else(|_| p.to_string_lossy().into_owned());
            artifacts.insert(name, hex::encode(Sha256::digest(&bytes)));
        }
        let manifest = json!({
            "command": command,
            "config": cfg.canonical(),
            "artifacts": artifacts,
        });
        self.json(&format!("{command}.manifest.json"), manifest)?;
        Ok(self.written)
    }
}

fn require(cfg: &PipelineConfig, p: &Path) -> Result<PathBuf, CliError> {
    let path = cfg.resolve(p);
    if path.is_file() {
        Ok(path)
    } else {
        Err(CliError::MissingInput(path))
    }
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|_| CliError::MissingInput(path.to_path_buf()))
}

fn efficacy_policy(cfg: &PipelineConfig) -> Result<EfficacyPolicy, CliError> {
    let mut policy = EfficacyPolicy::uniform(cfg.efficacy);
    let Some(p) = &cfg.efficacy_routes else {
        return Ok(policy);
    };
    let path = require(cfg, p)?;
    let bad = |what: String| CliError::InvalidInput(format!("{}: {what}", path.display()));
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(open(&path)?);
    for (i, row) in r.records().enumerate() {
        let row = row.map_err(|e| bad(e.to_string()))?;
        let (Some(a), Some(b), Some(e)) = (row.get(0), row.get(1), row.get(2)) else {
            return Err(bad(format!("row {}: expected origin,dest,efficacy", i + 2)));
        };
        let e: f64 = e.parse().map_err(|_| bad(format!("row {}: bad efficacy `{e}`", i + 2)))?;
        if !(0.0..=1.0).contains(&e) {
            return Err(bad(format!("row {}: efficacy {e} outside [0, 1]", i + 2)));
        }
        policy.routes.insert((a.to_owned(), b.to_owned()), e);
    }
    Ok(policy)
}

fn flow_params(cfg: &PipelineConfig) -> Result<FlowParams, CliError> {
    Ok(FlowParams {
        lambda: calibrate_lambda(cfg.calib_volume, cfg.calib_probability)?,
        mortality: cfg.mortality,
        efficacy: efficacy_policy(cfg)?,
        edge_floor: cfg.edge_floor,
    })
}

/// Configured non-port ids that occur in the network.
fn flagged_nonports(cfg: &PipelineConfig, net: &SpeciesFlowNetwork) -> Vec<String> {
    cfg.nonports
        .iter()
        .filter(|n| net.index_of(n).is_some())
        .cloned()
        .collect()
}

fn load_model(cfg: &PipelineConfig) -> Result<(DischargeModel, usize, Vec<ingest::Rejection>), CliError> {
    let events = ingest::load_discharges(&require(cfg, &cfg.discharges)?)?;
    let model = fit_discharge_models(&events.records)?;
    Ok((model, events.records.len(), events.rejections))
}

fn load_network(out: &Output) -> Result<SpeciesFlowNetwork, CliError> {
    let nodes = SpeciesFlowNetwork::read_node_list(open(&out.path(NODES_FILE))?)?;
    let net = SpeciesFlowNetwork::read_edge_list(open(&out.path(EDGES_FILE))?, nodes)?;
    if net.node_count() == 0 {
        return Err(CliError::EmptyNetwork(out.path(EDGES_FILE).display().to_string()));
    }
    Ok(net)
}

fn load_partition(out: &Output) -> Result<BTreeMap<String, usize>, CliError> {
    Ok(read_partition_csv(open(&out.path(PARTITION_FILE))?)?)
}

/// One law per vessel type so the generated regressions differ by type.
fn generator_laws() -> Vec<DischargeLaw> {
    (0..VesselType::ALL.len())
        .map(|k| DischargeLaw {
            intercept: 80.0 + 20.0 * k as f64,
            slope: 0.01 * (k + 1) as f64,
        })
        .collect()
}

fn cmd_generate(cfg: &PipelineConfig, out: &mut Output) -> Result<(), CliError> {
    let spec = ClusterSpec {
        sizes: cfg.gen_sizes.clone(),
        leak: cfg.gen_leak,
        legs_per_vessel: cfg.gen_legs,
        discharge_laws: generator_laws(),
        noise: cfg.gen_noise,
        ..ClusterSpec::default()
    };
    let data = generate_synthetic(cfg.seed, cfg.gen_ports, cfg.gen_vessels, &spec)?;
    let mut w = out.create(cfg.resolve(&cfg.voyages))?;
    ingest::write_voyages(&mut w, &data.voyages)?;
    w.flush()?;
    let mut w = out.create(cfg.resolve(&cfg.ports))?;
    ingest::write_ports(&mut w, &data.ports)?;
    w.flush()?;
    let mut w = out.create(cfg.resolve(&cfg.adjacency))?;
    ingest::write_adjacency(&mut w, &data.adjacency)?;
    w.flush()?;
    let mut w = out.create(cfg.resolve(&cfg.discharges))?;
    ingest::write_discharges(&mut w, &data.discharges)?;
    w.flush()?;

    let mut w = csv::Writer::from_writer(out.file("membership.csv")?);
    w.write_record(["port", "cluster"])?;
    for (port, c) in &data.membership {
        w.write_record([port.as_str(), &c.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct IngestSummary {
    voyages: usize,
    ports: usize,
    discharges: usize,
    rejected_voyages: Vec<ingest::Rejection>,
    rejected_ports: Vec<ingest::Rejection>,
    rejected_discharges: Vec<ingest::Rejection>,
}

fn cmd_build(cfg: &PipelineConfig, out: &mut Output) -> Result<(), CliError> {
    let voyages = ingest::load_voyages(&require(cfg, &cfg.voyages)?)?;
    let ports = ingest::load_ports(&require(cfg, &cfg.ports)?)?;
    let (model, n_events, rejected_discharges) = load_model(cfg)?;
    let params = flow_params(cfg)?;
    let port_ids: Vec<String> = ports.records.iter().map(|p| p.port_id.clone()).collect();
    let net = build_sfn(&voyages.records, &model, &params, &port_ids)?;
    let stats = network_stats(&net)?;
    let degrees = degree_distribution(&net)?;

    let mut w = out.file(EDGES_FILE)?;
    net.write_edge_list(&mut w)?;
    w.flush()?;
    let mut w = out.file(NODES_FILE)?;
    net.write_node_list(&mut w)?;
    w.flush()?;
    let mut w = out.file("sfn.graphml")?;
    net.write_graphml(&mut w)?;
    w.flush()?;
    out.json("discharge_model.json", model.to_json())?;
    out.json(
        "stats.json",
        json!({
            "lambda": params.lambda,
            "mortality": params.mortality,
            "total_flow": net.total_weight(),
            "route_efficacy_overrides": params.efficacy.routes.len(),
            "nonport_nodes": flagged_nonports(cfg, &net),
            "stats": stats,
            "degree_distribution": degrees,
            "ingest": IngestSummary {
                voyages: voyages.records.len(),
                ports: ports.records.len(),
                discharges: n_events,
                rejected_voyages: voyages.rejections,
                rejected_ports: ports.rejections,
                rejected_discharges,
            },
        }),
    )
}

fn cluster_network(cfg: &PipelineConfig, net: &SpeciesFlowNetwork) -> Result<RestartSummary, CliError> {
    let g = net.to_digraph();
    let flow = stationary_flow(&g, cfg.tau)?;
    Ok(optimize_restarts(&g, &flow, cfg.seed, cfg.restarts)?)
}

fn cmd_cluster(cfg: &PipelineConfig, out: &mut Output) -> Result<(), CliError> {
    let net = load_network(out)?;
    let summary = cluster_network(cfg, &net)?;
    let mut w = out.file(PARTITION_FILE)?;
    summary.best.write_csv(net.nodes(), &mut w)?;
    w.flush()?;
    out.json(
        "codelength.json",
        json!({
            "tau": cfg.tau,
            "seed": cfg.seed,
            "restarts": cfg.restarts,
            "codelength": summary.best.codelength(),
            "modules": summary.best.module_count(),
            "best_restart": summary.best_restart,
            "codelengths": summary.codelengths,
            "seeds": summary.seeds,
            "module_summaries": summary.best.modules(),
        }),
    )
}

fn cmd_report(cfg: &PipelineConfig, out: &mut Output) -> Result<(), CliError> {
    let net = load_network(out)?;
    let partition = load_partition(out)?;
    let modules = analytics::assignment_for(&net, &partition)?;
    let legs = ingest::load_voyages(&require(cfg, &cfg.voyages)?)?.records;
    let flow = analytics::flow_report(&net, &modules, cfg.top_k)?;
    let inter = analytics::top_inter_cluster_edges(&net, &modules, cfg.top_k)?;
    let vessels = analytics::vessel_type_stats(&legs, &partition);
    out.json(
        "report.json",
        json!({
            "flow": flow,
            "inter_cluster": inter,
            "vessel_types": vessels,
            "nonport_nodes": flagged_nonports(cfg, &net),
        }),
    )
}

fn legs_in(legs: &[VoyageLeg], period: &str) -> Vec<VoyageLeg> {
    let (a, b) = period_years(period).expect("periods validated with the config");
    legs.iter()
        .filter(|l| (a..=b).contains(&l.depart.year()))
        .cloned()
        .collect()
}

fn cmd_evolve(cfg: &PipelineConfig, out: &mut Output) -> Result<(), CliError> {
    if cfg.periods.len() < 2 {
        return Err(AnalyticsError::TooFewPeriods.into());
    }
    let legs = ingest::load_voyages(&require(cfg, &cfg.voyages)?)?.records;
    let (model, _, _) = load_model(cfg)?;
    let params = flow_params(cfg)?;
    let mut clusterings = Vec::new();
    let mut codelengths = BTreeMap::new();
    for period in &cfg.periods {
        let net = build_sfn(&legs_in(&legs, period), &model, &params, &[])?;
        if net.node_count() == 0 {
            return Err(CliError::EmptyNetwork(format!("no voyages in period {period}")));
        }
        let summary = cluster_network(cfg, &net)?;
        codelengths.insert(period.clone(), summary.best.codelength());
        clusterings.push(PeriodClustering::from_network(
            period.clone(),
            &net,
            summary.best.assignment(),
        )?);
    }
    let map = analytics::match_clusters(&clusterings)?;
    out.json(
        "evolution.json",
        json!({ "periods": map.periods, "transitions": map.transitions, "codelengths": codelengths }),
    )
}

fn cmd_risk(cfg: &PipelineConfig, out: &mut Output) -> Result<(), CliError> {
    let mut ports = ingest::load_ports(&require(cfg, &cfg.ports)?)?.records;
    let adjacency = ingest::load_adjacency(&require(cfg, &cfg.adjacency)?)?.records;
    if let Some(m) = cfg.risk_module {
        let partition = load_partition(out)?;
        ports.retain(|p| partition.get(&p.port_id) == Some(&m));
    }
    let net = build_risk_network(&ports, &adjacency, &TOLERANCE_GROUPS);
    let subs = sub_cluster(&net, cfg.seed)?;
    let mut w = out.file("risk_edges.csv")?;
    net.write_csv(&mut w)?;
    w.flush()?;
    let mut w = out.file("subclusters.csv")?;
    subs.write_csv(&net, &mut w)?;
    w.flush()?;
    let mut levels = BTreeMap::new();
    for e in &net.edges {
        *levels.entry(e.level).or_insert(0usize) += 1;
    }
    out.json(
        "risk.json",
        json!({
            "risk_module": cfg.risk_module,
            "tolerance_groups": TOLERANCE_GROUPS,
            "edges": net.edges.len(),
            "edges_by_level": levels,
            "coverage": net.coverage,
            "subclusters": subs.summaries,
            "codelength": subs.partition.codelength(),
        }),
    )
}

fn read_edge_pairs(path: &Path) -> Result<Vec<(String, String)>, CliError> {
    let mut r = csv::Reader::from_reader(open(path)?);
    let mut pairs = Vec::new();
    for row in r.records() {
        let row = row.map_err(|e| CliError::InvalidInput(format!("{}: {e}", path.display())))?;
        match (row.get(0), row.get(1)) {
            (Some(a), Some(b)) => pairs.push((a.trim().to_owned(), b.trim().to_owned())),
            _ => return Err(CliError::InvalidInput(format!("{}: expected origin,dest", path.display()))),
        }
    }
    Ok(pairs)
}

fn cmd_scenario(cfg: &PipelineConfig, out: &mut Output) -> Result<(), CliError> {
    let net = load_network(out)?;
    let top = analytics::remove_top_degree(&net, cfg.fraction)?;
    let listed = match &cfg.scenario_edges {
        Some(p) => {
            let pairs = read_edge_pairs(&require(cfg, p)?)?;
            let modules = match out.path(PARTITION_FILE).is_file() {
                true => Some(analytics::assignment_for(&net, &load_partition(out)?)?),
                false => None,
            };
            Some(analytics::remove_edges(&net, &pairs, modules.as_deref())?)
        }
        None => None,
    };
    out.json("scenario.json", json!({ "top_degree": top, "listed_edges": listed }))
}
