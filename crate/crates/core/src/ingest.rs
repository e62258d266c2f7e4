//! Voyage, port, ecoregion and discharge-event records.
//!
//! Each loader validates the header, parses every row, and splits the result
//! into accepted records and a [`Rejection`] list for rows that parse but break
//! a domain invariant. Rows that cannot be parsed at all are hard errors.

pub mod synthetic;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const VOYAGES_HEADER: [&str; 7] = [
    "vessel_id",
    "vessel_type",
    "dwt",
    "origin",
    "dest",
    "depart",
    "arrive",
];
pub const PORTS_HEADER: [&str; 7] = [
    "port_id",
    "name",
    "lat",
    "lon",
    "ecoregion_id",
    "temperature_c",
    "salinity_ppt",
];
pub const ADJACENCY_HEADER: [&str; 2] = ["ecoregion_a", "ecoregion_b"];
pub const DISCHARGES_HEADER: [&str; 3] = ["vessel_type", "dwt", "discharge_m3"];

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("empty file")]
    EmptyFile,
    #[error("port calls for vessel `{0}` are not sorted by date")]
    UnsortedCalls(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Vessel categories used for the discharge regressions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum VesselType {
    BulkDry,
    GeneralCargo,
    RoRoCargo,
    Chemical,
    LiquifiedGasTanker,
    OilTanker,
    Passenger,
    RefrigeratedCargo,
    Container,
    Other,
}

impl VesselType {
    pub const ALL: [VesselType; 10] = [
        VesselType::BulkDry,
        VesselType::GeneralCargo,
        VesselType::RoRoCargo,
        VesselType::Chemical,
        VesselType::LiquifiedGasTanker,
        VesselType::OilTanker,
        VesselType::Passenger,
        VesselType::RefrigeratedCargo,
        VesselType::Container,
        VesselType::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            VesselType::BulkDry => "BulkDry",
            VesselType::GeneralCargo => "GeneralCargo",
            VesselType::RoRoCargo => "RoRoCargo",
            VesselType::Chemical => "Chemical",
            VesselType::LiquifiedGasTanker => "LiquifiedGasTanker",
            VesselType::OilTanker => "OilTanker",
            VesselType::Passenger => "Passenger",
            VesselType::RefrigeratedCargo => "RefrigeratedCargo",
            VesselType::Container => "Container",
            VesselType::Other => "Other",
        }
    }
}

impl fmt::Display for VesselType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for VesselType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        VesselType::ALL
            .iter()
            .copied()
            .find(|t| t.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown vessel type `{s}`"))
    }
}

/// One direct port-to-port movement of a vessel.
#[derive(Debug, Clone, PartialEq)]
pub struct VoyageLeg {
    pub vessel_id: String,
    pub vessel_type: VesselType,
    pub dwt: f64,
    pub origin: String,
    pub dest: String,
    pub depart: NaiveDate,
    pub arrive: NaiveDate,
}

impl VoyageLeg {
    /// Whole days between departure and arrival.
    pub fn duration_days(&self) -> i64 {
        (self.arrive - self.depart).num_days()
    }

    /// Reason this leg breaks an invariant, if any.
    pub fn violation(&self) -> Option<&'static str> {
        if self.arrive < self.depart {
            Some("negative duration")
        } else if self.origin == self.dest {
            Some("self-loop leg")
        } else if self.dwt.is_nan() || self.dwt <= 0.0 {
            Some("non-positive dwt")
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PortRecord {
    pub port_id: String,
    pub name: String,
    pub lat: f64,
    pub lon: f64,
    pub ecoregion_id: String,
    pub temperature: Option<f64>,
    pub salinity: Option<f64>,
}

impl PortRecord {
    /// Both annual means, when the port has them.
    pub fn environment(&self) -> Option<(f64, f64)> {
        Some((self.temperature?, self.salinity?))
    }
}

/// Unordered pairs of ecoregions that are declared contiguous.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EcoregionAdjacency {
    pairs: BTreeSet<(String, String)>,
}

impl EcoregionAdjacency {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts the pair; self pairs are ignored and `false` is returned.
    pub fn insert(&mut self, a: &str, b: &str) -> bool {
        if a == b {
            return false;
        }
        self.pairs.insert(ordered(a, b));
        true
    }

    pub fn contiguous(&self, a: &str, b: &str) -> bool {
        self.pairs.contains(&ordered(a, b))
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&str, &str)> {
        self.pairs.iter().map(|(a, b)| (a.as_str(), b.as_str()))
    }
}

fn ordered(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_owned(), b.to_owned())
    } else {
        (b.to_owned(), a.to_owned())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DischargeEvent {
    pub vessel_type: VesselType,
    pub dwt: f64,
    pub discharge: f64,
}

/// A row that parsed but was not accepted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Rejection {
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct Loaded<T> {
    pub records: T,
    pub rejections: Vec<Rejection>,
}

/// Maps required column names to their positions in the header row.
struct Columns(Vec<usize>);

impl Columns {
    fn resolve(headers: &csv::StringRecord, required: &[&str]) -> Result<Self, IngestError> {
        let idx = required
            .iter()
            .map(|name| {
                headers
                    .iter()
                    .position(|h| h.trim() == *name)
                    .ok_or_else(|| IngestError::MissingColumn((*name).to_owned()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Columns(idx))
    }

    fn get<'r>(&self, record: &'r csv::StringRecord, k: usize) -> &'r str {
        record.get(self.0[k]).unwrap_or("").trim()
    }
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::None)
        .from_reader(input)
}

/// Reads the whole input and returns the header and all records with their line numbers.
fn read_table<R: Read>(
    input: R,
    required: &[&str],
) -> Result<(Columns, Vec<(u64, csv::StringRecord)>), IngestError> {
    let mut rdr = reader(input);
    let headers = rdr.headers()?.clone();
    if headers.iter().all(|h| h.trim().is_empty()) {
        return Err(IngestError::EmptyFile);
    }
    let cols = Columns::resolve(&headers, required)?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        rows.push((line, rec));
    }
    Ok((cols, rows))
}

fn malformed(line: u64, reason: impl Into<String>) -> IngestError {
    IngestError::MalformedRow {
        line,
        reason: reason.into(),
    }
}

fn parse_f64(line: u64, field: &str, raw: &str) -> Result<f64, IngestError> {
    let v: f64 = raw
        .parse()
        .map_err(|_| malformed(line, format!("{field}: not a number `{raw}`")))?;
    if !v.is_finite() {
        return Err(malformed(line, format!("{field}: not finite")));
    }
    Ok(v)
}

fn parse_opt_f64(line: u64, field: &str, raw: &str) -> Result<Option<f64>, IngestError> {
    if raw.is_empty() {
        Ok(None)
    } else {
        parse_f64(line, field, raw).map(Some)
    }
}

fn parse_date(line: u64, field: &str, raw: &str) -> Result<NaiveDate, IngestError> {
    NaiveDate::parse_from_str(raw, "%Y-%m-%d")
        .map_err(|_| malformed(line, format!("{field}: not an ISO-8601 date `{raw}`")))
}

fn parse_type(line: u64, raw: &str) -> Result<VesselType, IngestError> {
    raw.parse().map_err(|e: String| malformed(line, e))
}

fn non_empty<'a>(line: u64, field: &str, raw: &'a str) -> Result<&'a str, IngestError> {
    if raw.is_empty() {
        Err(malformed(line, format!("{field}: empty")))
    } else {
        Ok(raw)
    }
}

pub fn load_voyages(path: &Path) -> Result<Loaded<Vec<VoyageLeg>>, IngestError> {
    read_voyages(std::fs::File::open(path)?)
}

pub fn read_voyages<R: Read>(input: R) -> Result<Loaded<Vec<VoyageLeg>>, IngestError> {
    let (cols, rows) = read_table(input, &VOYAGES_HEADER)?;
    let mut records = Vec::with_capacity(rows.len());
    let mut rejections = Vec::new();
    for (line, rec) in rows {
        let leg = VoyageLeg {
            vessel_id: non_empty(line, "vessel_id", cols.get(&rec, 0))?.to_owned(),
            vessel_type: parse_type(line, cols.get(&rec, 1))?,
            dwt: parse_f64(line, "dwt", cols.get(&rec, 2))?,
            origin: non_empty(line, "origin", cols.get(&rec, 3))?.to_owned(),
            dest: non_empty(line, "dest", cols.get(&rec, 4))?.to_owned(),
            depart: parse_date(line, "depart", cols.get(&rec, 5))?,
            arrive: parse_date(line, "arrive", cols.get(&rec, 6))?,
        };
        match leg.violation() {
            Some(reason) => rejections.push(Rejection {
                line,
                reason: reason.to_owned(),
            }),
            None => records.push(leg),
        }
    }
    Ok(Loaded {
        records,
        rejections,
    })
}

pub fn write_voyages<W: Write>(out: W, legs: &[VoyageLeg]) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(VOYAGES_HEADER)?;
    for l in legs {
        w.write_record([
            l.vessel_id.as_str(),
            l.vessel_type.as_str(),
            &l.dwt.to_string(),
            &l.origin,
            &l.dest,
            &l.depart.format("%Y-%m-%d").to_string(),
            &l.arrive.format("%Y-%m-%d").to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_ports(path: &Path) -> Result<Loaded<Vec<PortRecord>>, IngestError> {
    read_ports(std::fs::File::open(path)?)
}

pub fn read_ports<R: Read>(input: R) -> Result<Loaded<Vec<PortRecord>>, IngestError> {
    let (cols, rows) = read_table(input, &PORTS_HEADER)?;
    let mut seen = BTreeSet::new();
    let mut records = Vec::with_capacity(rows.len());
    let mut rejections = Vec::new();
    for (line, rec) in rows {
        let port = PortRecord {
            port_id: non_empty(line, "port_id", cols.get(&rec, 0))?.to_owned(),
            name: cols.get(&rec, 1).to_owned(),
            lat: parse_f64(line, "lat", cols.get(&rec, 2))?,
            lon: parse_f64(line, "lon", cols.get(&rec, 3))?,
            ecoregion_id: cols.get(&rec, 4).to_owned(),
            temperature: parse_opt_f64(line, "temperature_c", cols.get(&rec, 5))?,
            salinity: parse_opt_f64(line, "salinity_ppt", cols.get(&rec, 6))?,
        };
        let reason = if !(-90.0..=90.0).contains(&port.lat) {
            Some("latitude out of range")
        } else if !(-180.0..=180.0).contains(&port.lon) {
            Some("longitude out of range")
        } else if port.salinity.is_some_and(|s| s < 0.0) {
            Some("negative salinity")
        } else if seen.contains(&port.port_id) {
            Some("duplicate port id")
        } else {
            None
        };
        match reason {
            Some(reason) => rejections.push(Rejection {
                line,
                reason: reason.to_owned(),
            }),
            None => {
                seen.insert(port.port_id.clone());
                records.push(port);
            }
        }
    }
    Ok(Loaded {
        records,
        rejections,
    })
}

pub fn write_ports<W: Write>(out: W, ports: &[PortRecord]) -> Result<(), IngestError> {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(PORTS_HEADER)?;
    for p in ports {
        w.write_record([
            p.port_id.as_str(),
            &p.name,
            &p.lat.to_string(),
            &p.lon.to_string(),
            &p.ecoregion_id,
            &opt(p.temperature),
            &opt(p.salinity),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_adjacency(path: &Path) -> Result<Loaded<EcoregionAdjacency>, IngestError> {
    read_adjacency(std::fs::File::open(path)?)
}

pub fn read_adjacency<R: Read>(input: R) -> Result<Loaded<EcoregionAdjacency>, IngestError> {
    let (cols, rows) = read_table(input, &ADJACENCY_HEADER)?;
    let mut adjacency = EcoregionAdjacency::new();
    let mut rejections = Vec::new();
    for (line, rec) in rows {
        let a = non_empty(line, "ecoregion_a", cols.get(&rec, 0))?;
        let b = non_empty(line, "ecoregion_b", cols.get(&rec, 1))?;
        if !adjacency.insert(a, b) {
            rejections.push(Rejection {
                line,
                reason: "self pair".to_owned(),
            });
        }
    }
    Ok(Loaded {
        records: adjacency,
        rejections,
    })
}

pub fn write_adjacency<W: Write>(out: W, adjacency: &EcoregionAdjacency) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(ADJACENCY_HEADER)?;
    for (a, b) in adjacency.pairs() {
        w.write_record([a, b])?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_discharges(path: &Path) -> Result<Loaded<Vec<DischargeEvent>>, IngestError> {
    read_discharges(std::fs::File::open(path)?)
}

pub fn read_discharges<R: Read>(input: R) -> Result<Loaded<Vec<DischargeEvent>>, IngestError> {
    let (cols, rows) = read_table(input, &DISCHARGES_HEADER)?;
    let mut records = Vec::with_capacity(rows.len());
    let mut rejections = Vec::new();
    for (line, rec) in rows {
        let ev = DischargeEvent {
            vessel_type: parse_type(line, cols.get(&rec, 0))?,
            dwt: parse_f64(line, "dwt", cols.get(&rec, 1))?,
            discharge: parse_f64(line, "discharge_m3", cols.get(&rec, 2))?,
        };
        let reason = if ev.dwt.is_nan() || ev.dwt <= 0.0 {
            Some("non-positive dwt")
        } else if ev.discharge.is_nan() || ev.discharge <= 0.0 {
            Some("zero discharge")
        } else {
            None
        };
        match reason {
            Some(reason) => rejections.push(Rejection {
                line,
                reason: reason.to_owned(),
            }),
            None => records.push(ev),
        }
    }
    Ok(Loaded {
        records,
        rejections,
    })
}

pub fn write_discharges<W: Write>(out: W, events: &[DischargeEvent]) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(DISCHARGES_HEADER)?;
    for e in events {
        w.write_record([
            e.vessel_type.as_str(),
            &e.dwt.to_string(),
            &e.discharge.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// A vessel's stay at a port. `sail` defaults to `arrival` when unknown.
#[derive(Debug, Clone, PartialEq)]
pub struct PortCall {
    pub vessel_id: String,
    pub vessel_type: VesselType,
    pub dwt: f64,
    pub port: String,
    pub arrival: NaiveDate,
    pub sail: Option<NaiveDate>,
}

impl PortCall {
    fn departure(&self) -> NaiveDate {
        self.sail.unwrap_or(self.arrival)
    }
}

/// Turns per-vessel port-call sequences into direct legs.
///
/// Calls are grouped by vessel in first-seen order and must already be
/// sorted by arrival date within each vessel (equal dates keep input order).
/// Consecutive calls at the same port merge into one stay.
pub fn derive_legs(calls: &[PortCall]) -> Result<Vec<VoyageLeg>, IngestError> {
    let mut order: Vec<&str> = Vec::new();
    let mut by_vessel: BTreeMap<&str, Vec<&PortCall>> = BTreeMap::new();
    for c in calls {
        let entry = by_vessel.entry(c.vessel_id.as_str()).or_default();
        if entry.is_empty() {
            order.push(&c.vessel_id);
        }
        entry.push(c);
    }

    let mut legs = Vec::new();
    for vessel in order {
        let seq = &by_vessel[vessel];
        if seq.windows(2).any(|w| w[1].arrival < w[0].arrival) {
            return Err(IngestError::UnsortedCalls(vessel.to_owned()));
        }
        let mut last: Option<&PortCall> = None;
        for &call in seq {
            match last {
                Some(prev) if prev.port == call.port => {}
                Some(prev) => legs.push(VoyageLeg {
                    vessel_id: call.vessel_id.clone(),
                    vessel_type: call.vessel_type,
                    dwt: call.dwt,
                    origin: prev.port.clone(),
                    dest: call.port.clone(),
                    depart: prev.departure(),
                    arrive: call.arrival,
                }),
                None => {}
            }
            last = Some(call);
        }
    }
    Ok(legs)
}
