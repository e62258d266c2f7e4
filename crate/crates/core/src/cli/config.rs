//! Flat `key = value` pipeline configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Every key is optional
//! and falls back to its default; unknown or repeated keys are errors. Relative
//! paths resolve against the directory of the config file.

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use super::CliError;
use crate::sfn::{DEFAULT_EDGE_FLOOR, DEFAULT_MORTALITY, DEFAULT_REFERENCE_PROBABILITY, DEFAULT_REFERENCE_VOLUME};

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub voyages: PathBuf,
    pub ports: PathBuf,
    pub adjacency: PathBuf,
    pub discharges: PathBuf,
    pub out: PathBuf,
    pub calib_volume: f64,
    pub calib_probability: f64,
    pub mortality: f64,
    /// Default ballast-management efficacy applied to every route.
    pub efficacy: f64,
    /// CSV of `origin,dest,efficacy` overriding `efficacy` on single routes.
    pub efficacy_routes: Option<PathBuf>,
    pub edge_floor: f64,
    pub tau: f64,
    pub restarts: usize,
    pub seed: u64,
    pub top_k: usize,
    pub fraction: f64,
    /// Period labels for `evolve`: a year (`2005`) or an inclusive year range (`2005-2007`).
    pub periods: Vec<String>,
    /// Restrict `risk` to the ports of this module of the SFN partition.
    pub risk_module: Option<usize>,
    /// CSV of `origin,dest` edges removed by `scenario`.
    pub scenario_edges: Option<PathBuf>,
    /// Node ids that are not real ports (straits, canals); flagged in outputs.
    pub nonports: Vec<String>,
    pub gen_ports: usize,
    pub gen_vessels: usize,
    pub gen_sizes: Vec<usize>,
    pub gen_leak: f64,
    pub gen_legs: usize,
    pub gen_noise: f64,
    /// Directory that relative paths resolve against; not part of the file.
    pub base_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            voyages: "voyages.csv".into(),
            ports: "ports.csv".into(),
            adjacency: "adjacency.csv".into(),
            discharges: "discharges.csv".into(),
            out: "out".into(),
            calib_volume: DEFAULT_REFERENCE_VOLUME,
            calib_probability: DEFAULT_REFERENCE_PROBABILITY,
            mortality: DEFAULT_MORTALITY,
            efficacy: 1.0,
            efficacy_routes: None,
            edge_floor: DEFAULT_EDGE_FLOOR,
            tau: crate::mapeq::DEFAULT_TELEPORT,
            restarts: 10,
            seed: 1,
            top_k: 10,
            fraction: 0.2,
            periods: Vec::new(),
            risk_module: None,
            scenario_edges: None,
            nonports: Vec::new(),
            gen_ports: 40,
            gen_vessels: 30,
            gen_sizes: vec![20, 20],
            gen_leak: 0.02,
            gen_legs: 12,
            gen_noise: 0.0,
            base_dir: PathBuf::from("."),
        }
    }
}

pub const KEYS: [&str; 26] = [
    "voyages",
    "ports",
    "adjacency",
    "discharges",
    "out",
    "calib_volume",
    "calib_probability",
    "mortality",
    "efficacy",
    "efficacy_routes",
    "edge_floor",
    "tau",
    "restarts",
    "seed",
    "top_k",
    "fraction",
    "periods",
    "risk_module",
    "scenario_edges",
    "nonports",
    "gen_ports",
    "gen_vessels",
    "gen_sizes",
    "gen_leak",
    "gen_legs",
    "gen_noise",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, CliError>
where
    T::Err: Display,
{
    value
        .parse()
        .map_err(|e| CliError::InvalidConfig(format!("{key}: cannot parse `{value}`: {e}")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, CliError>
where
    T::Err: Display,
{
    if value.is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| parse(key, v.trim())).collect()
}

fn join<T: Display>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn path_str(p: &Path) -> Result<&str, CliError> {
    p.to_str()
        .ok_or_else(|| CliError::InvalidConfig(format!("path {} is not UTF-8", p.display())))
}

impl PipelineConfig {
    pub fn parse_str(text: &str) -> Result<Self, CliError> {
        let mut cfg = PipelineConfig::default();
        let mut seen = std::collections::BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::InvalidConfig(format!("line {}: expected key = value", i + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_owned()) {
                return Err(CliError::InvalidConfig(format!("line {}: duplicate key `{key}`", i + 1)));
            }
            cfg.set(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative paths in it resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => CliError::MissingInput(path.to_path_buf()),
            _ => CliError::InvalidConfig(format!("{}: {e}", path.display())),
        })?;
        let mut cfg = Self::parse_str(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let opt_path = |v: &str| (!v.is_empty()).then(|| PathBuf::from(v));
        match key {
            "voyages" => self.voyages = value.into(),
            "ports" => self.ports = value.into(),
            "adjacency" => self.adjacency = value.into(),
            "discharges" => self.discharges = value.into(),
            "out" => self.out = value.into(),
            "calib_volume" => self.calib_volume = parse(key, value)?,
            "calib_probability" => self.calib_probability = parse(key, value)?,
            "mortality" => self.mortality = parse(key, value)?,
            "efficacy" => self.efficacy = parse(key, value)?,
            "efficacy_routes" => self.efficacy_routes = opt_path(value),
            "edge_floor" => self.edge_floor = parse(key, value)?,
            "tau" => self.tau = parse(key, value)?,
            "restarts" => self.restarts = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "top_k" => self.top_k = parse(key, value)?,
            "fraction" => self.fraction = parse(key, value)?,
            "periods" => self.periods = parse_list(key, value)?,
            "risk_module" => {
                self.risk_module = if value.is_empty() { None } else { Some(parse(key, value)?) }
            }
            "scenario_edges" => self.scenario_edges = opt_path(value),
            "nonports" => self.nonports = parse_list(key, value)?,
            "gen_ports" => self.gen_ports = parse(key, value)?,
            "gen_vessels" => self.gen_vessels = parse(key, value)?,
            "gen_sizes" => self.gen_sizes = parse_list(key, value)?,
            "gen_leak" => self.gen_leak = parse(key, value)?,
            "gen_legs" => self.gen_legs = parse(key, value)?,
            "gen_noise" => self.gen_noise = parse(key, value)?,
            _ => return Err(CliError::InvalidConfig(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |what: &str| Err(CliError::InvalidConfig(what.to_owned()));
        if !(self.calib_volume.is_finite() && self.calib_volume > 0.0) {
            return bad("calib_volume must be positive");
        }
        if !(self.calib_probability > 0.0 && self.calib_probability < 1.0) {
            return bad("calib_probability must lie in (0, 1)");
        }
        if !(self.mortality.is_finite() && self.mortality >= 0.0) {
            return bad("mortality must be non-negative");
        }
        if !(0.0..=1.0).contains(&self.efficacy) {
            return bad("efficacy must lie in [0, 1]");
        }
        if !(0.0..1.0).contains(&self.edge_floor) {
            return bad("edge_floor must lie in [0, 1)");
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return bad("tau must lie in (0, 1)");
        }
        if self.restarts == 0 {
            return bad("restarts must be at least 1");
        }
        if !(self.fraction > 0.0 && self.fraction < 1.0) {
            return bad("fraction must lie in (0, 1)");
        }
        if !(0.0..=1.0).contains(&self.gen_leak) {
            return bad("gen_leak must lie in [0, 1]");
        }
        if !(self.gen_noise.is_finite() && self.gen_noise >= 0.0) {
            return bad("gen_noise must be non-negative");
        }
        for p in &self.periods {
            if period_years(p).is_none() {
                return Err(CliError::InvalidConfig(format!("bad period `{p}`")));
            }
        }
        for p in [&self.voyages, &self.ports, &self.adjacency, &self.discharges, &self.out] {
            path_str(p)?;
        }
        Ok(())
    }

    /// Every key with its effective value, one per line in fixed order.
    pub fn canonical(&self) -> String {
        let p = |p: &Path| p.to_string_lossy().into_owned();
        let lines: [(&str, String); 26] = [
            ("voyages", p(&self.voyages)),
            ("ports", p(&self.ports)),
            ("adjacency", p(&self.adjacency)),
            ("discharges", p(&self.discharges)),
            ("out", p(&self.out)),
            ("calib_volume", self.calib_volume.to_string()),
            ("calib_probability", self.calib_probability.to_string()),
            ("mortality", self.mortality.to_string()),
            ("efficacy", self.efficacy.to_string()),
            ("efficacy_routes", self.efficacy_routes.as_deref().map(p).unwrap_or_default()),
            ("edge_floor", self.edge_floor.to_string()),
            ("tau", self.tau.to_string()),
            ("restarts", self.restarts.to_string()),
            ("seed", self.seed.to_string()),
            ("top_k", self.top_k.to_string()),
            ("fraction", self.fraction.to_string()),
            ("periods", self.periods.join(",")),
            ("risk_module", self.risk_module.map(|m| m.to_string()).unwrap_or_default()),
            ("scenario_edges", self.scenario_edges.as_deref().map(p).unwrap_or_default()),
            ("nonports", self.nonports.join(",")),
            ("gen_ports", self.gen_ports.to_string()),
            ("gen_vessels", self.gen_vessels.to_string()),
            ("gen_sizes", join(&self.gen_sizes)),
            ("gen_leak", self.gen_leak.to_string()),
            ("gen_legs", self.gen_legs.to_string()),
            ("gen_noise", self.gen_noise.to_string()),
        ];
        lines.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// SHA-256 of [`canonical`](Self::canonical), lowercase hex.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.resolve(&self.out)
    }
}

/// Inclusive year range of a period label.
pub fn period_years(label: &str) -> Option<(i32, i32)> {
    let (a, b) = match label.split_once('-') {
        Some((a, b)) => (a.trim().parse().ok()?, b.trim().parse().ok()?),
        None => {
            let y = label.trim().parse().ok()?;
            (y, y)
        }
    };
    (a <= b).then_some((a, b))
}
