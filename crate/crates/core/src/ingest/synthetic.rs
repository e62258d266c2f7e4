//! Seeded fixture generators with known ground truth.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{Days, NaiveDate};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::{DischargeEvent, EcoregionAdjacency, PortRecord, VesselType, VoyageLeg};

#[derive(Debug, Error, PartialEq)]
pub enum SyntheticError {
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DischargeLaw {
    pub intercept: f64,
    pub slope: f64,
}

/// Planted-cluster layout and the knobs of the voyage and discharge generators.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSpec {
    /// Ports per planted cluster; must sum to `n_ports`, each at least 2.
    pub sizes: Vec<usize>,
    /// Probability that a leg jumps to a port in another cluster.
    pub leak: f64,
    pub legs_per_vessel: usize,
    /// Vessel type `k` (in [`VesselType::ALL`] order) follows `discharge_laws[k % len]`.
    pub discharge_laws: Vec<DischargeLaw>,
    /// Half-width of the uniform noise added to every discharge.
    pub noise: f64,
    pub events_per_type: usize,
    pub start: NaiveDate,
}

impl Default for ClusterSpec {
    fn default() -> Self {
        ClusterSpec {
            sizes: vec![10, 10],
            leak: 0.05,
            legs_per_vessel: 12,
            discharge_laws: vec![DischargeLaw {
                intercept: 100.0,
                slope: 0.05,
            }],
            noise: 0.0,
            events_per_type: 20,
            start: NaiveDate::from_ymd_opt(2005, 1, 1).expect("valid date"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub ports: Vec<PortRecord>,
    pub voyages: Vec<VoyageLeg>,
    pub adjacency: EcoregionAdjacency,
    pub discharges: Vec<DischargeEvent>,
    /// Planted cluster of every port.
    pub membership: BTreeMap<String, usize>,
}

const DWT_RANGE: (u32, u32) = (5_000, 150_000);
const EVENT_DWT_RANGE: (u32, u32) = (1_000, 200_000);

fn port_id(i: usize) -> String {
    format!("P{i:04}")
}

fn invalid(msg: impl Into<String>) -> SyntheticError {
    SyntheticError::InvalidSpec(msg.into())
}

fn validate(n_ports: usize, n_vessels: usize, spec: &ClusterSpec) -> Result<(), SyntheticError> {
    if n_ports < 2 {
        return Err(invalid("n_ports must be at least 2"));
    }
    if spec.sizes.is_empty() || spec.sizes.iter().sum::<usize>() != n_ports {
        return Err(invalid("cluster sizes must sum to n_ports"));
    }
    if spec.sizes.iter().any(|&s| s < 2) {
        return Err(invalid("every cluster needs at least 2 ports"));
    }
    if n_vessels < spec.sizes.len() {
        return Err(invalid("need at least one vessel per cluster"));
    }
    if !(0.0..=1.0).contains(&spec.leak) {
        return Err(invalid("leak must lie in [0, 1]"));
    }
    if spec.leak > 0.0 && spec.sizes.len() < 2 {
        return Err(invalid("leak needs at least two clusters"));
    }
    if spec.legs_per_vessel == 0 {
        return Err(invalid("legs_per_vessel must be positive"));
    }
    if spec.discharge_laws.is_empty() {
        return Err(invalid("at least one discharge law is required"));
    }
    if spec.noise.is_nan() || spec.noise < 0.0 {
        return Err(invalid("noise must be non-negative"));
    }
    let min_dwt = EVENT_DWT_RANGE.0 as f64;
    for law in &spec.discharge_laws {
        let lowest = law.intercept + law.slope.min(0.0) * EVENT_DWT_RANGE.1 as f64
            + law.slope.max(0.0) * min_dwt;
        if lowest - spec.noise <= 0.0 {
            return Err(invalid("discharge law can produce non-positive volumes"));
        }
    }
    Ok(())
}

fn random_leg_dates(rng: &mut ChaCha8Rng, cursor: &mut NaiveDate) -> (NaiveDate, NaiveDate) {
    let depart = *cursor + Days::new(rng.gen_range(1..=3));
    let arrive = depart + Days::new(rng.gen_range(0..=25));
    *cursor = arrive;
    (depart, arrive)
}

/// Builds ports, voyages, ecoregion adjacency and discharge events for a planted
/// cluster layout. Output is fully determined by `seed`.
///
/// The first vessel of each cluster tours all of its ports in order, so with
/// `leak == 0` the weak components of the voyage graph are exactly the clusters.
pub fn generate_synthetic(
    seed: u64,
    n_ports: usize,
    n_vessels: usize,
    spec: &ClusterSpec,
) -> Result<SyntheticData, SyntheticError> {
    validate(n_ports, n_vessels, spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut clusters: Vec<Vec<usize>> = Vec::with_capacity(spec.sizes.len());
    let mut ports = Vec::with_capacity(n_ports);
    let mut membership = BTreeMap::new();
    let mut adjacency = EcoregionAdjacency::new();
    let mut next = 0;
    for (c, &size) in spec.sizes.iter().enumerate() {
        let center = (rng.gen_range(-60.0..60.0_f64), rng.gen_range(-170.0..170.0_f64));
        let base_t: f64 = rng.gen_range(2.0..28.0);
        let base_s: f64 = rng.gen_range(5.0..35.0);
        let members: Vec<usize> = (next..next + size).collect();
        next += size;
        let mut last_region: Option<String> = None;
        for (k, &i) in members.iter().enumerate() {
            let region = format!("R{c}-{}", k / 3);
            if let Some(prev) = &last_region {
                if *prev != region {
                    adjacency.insert(prev, &region);
                }
            }
            last_region = Some(region.clone());
            let id = port_id(i);
            membership.insert(id.clone(), c);
            ports.push(PortRecord {
                port_id: id,
                name: format!("Port {i}"),
                lat: round(center.0 + rng.gen_range(-5.0..5.0), 4),
                lon: round(center.1 + rng.gen_range(-5.0..5.0), 4),
                ecoregion_id: region,
                temperature: Some(round(base_t + rng.gen_range(-1.0..1.0), 2)),
                salinity: Some(round((base_s + rng.gen_range(-1.0..1.0)).max(0.0), 2)),
            });
        }
        clusters.push(members);
    }
    let cluster_of: Vec<usize> = {
        let mut v = vec![0; n_ports];
        for (c, members) in clusters.iter().enumerate() {
            for &i in members {
                v[i] = c;
            }
        }
        v
    };

    let mut voyages = Vec::new();
    for v in 0..n_vessels {
        let vessel_id = format!("V{v:05}");
        let vessel_type = *VesselType::ALL.choose(&mut rng).expect("non-empty");
        let dwt = rng.gen_range(DWT_RANGE.0..=DWT_RANGE.1) as f64;
        let mut cursor = spec.start + Days::new(rng.gen_range(0..30));
        let mut emit = |rng: &mut ChaCha8Rng, from: usize, to: usize, cursor: &mut NaiveDate| {
            let (depart, arrive) = random_leg_dates(rng, cursor);
            voyages.push(VoyageLeg {
                vessel_id: vessel_id.clone(),
                vessel_type,
                dwt,
                origin: port_id(from),
                dest: port_id(to),
                depart,
                arrive,
            });
        };

        if v < clusters.len() {
            // liner: one tour through its cluster
            for w in clusters[v].windows(2) {
                emit(&mut rng, w[0], w[1], &mut cursor);
            }
            continue;
        }

        let home = rng.gen_range(0..clusters.len());
        let mut here = *clusters[home].choose(&mut rng).expect("non-empty cluster");
        for _ in 0..spec.legs_per_vessel {
            let c = cluster_of[here];
            let there = if spec.leak > 0.0 && rng.gen_bool(spec.leak) {
                let other = loop {
                    let o = rng.gen_range(0..clusters.len());
                    if o != c {
                        break o;
                    }
                };
                *clusters[other].choose(&mut rng).expect("non-empty cluster")
            } else {
                loop {
                    let p = *clusters[c].choose(&mut rng).expect("non-empty cluster");
                    if p != here {
                        break p;
                    }
                }
            };
            emit(&mut rng, here, there, &mut cursor);
            here = there;
        }
    }

    let mut discharges = Vec::with_capacity(VesselType::ALL.len() * spec.events_per_type);
    for (k, &vt) in VesselType::ALL.iter().enumerate() {
        let law = spec.discharge_laws[k % spec.discharge_laws.len()];
        for _ in 0..spec.events_per_type {
            let dwt = rng.gen_range(EVENT_DWT_RANGE.0..=EVENT_DWT_RANGE.1) as f64;
            let jitter = if spec.noise > 0.0 {
                rng.gen_range(-spec.noise..=spec.noise)
            } else {
                0.0
            };
            discharges.push(DischargeEvent {
                vessel_type: vt,
                dwt,
                discharge: law.intercept + law.slope * dwt + jitter,
            });
        }
    }

    Ok(SyntheticData {
        ports,
        voyages,
        adjacency,
        discharges,
        membership,
    })
}

fn round(x: f64, digits: i32) -> f64 {
    let f = 10f64.powi(digits);
    (x * f).round() / f
}

/// Voyages over a preferential-attachment port topology.
///
/// Starts from a complete core of `attach + 1` ports; every later port links to
/// `attach` distinct existing ports chosen with probability proportional to degree.
/// Each undirected link yields one leg in each direction, so the resulting
/// network has a heavy-tailed degree distribution with a few hubs.
pub fn scale_free_voyages(
    seed: u64,
    n_ports: usize,
    attach: usize,
) -> Result<(Vec<PortRecord>, Vec<VoyageLeg>), SyntheticError> {
    if attach == 0 || n_ports <= attach {
        return Err(invalid("need attach >= 1 and n_ports > attach"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut links: Vec<(usize, usize)> = Vec::new();
    // one entry per link endpoint, so sampling from it is degree-proportional
    let mut endpoints: Vec<usize> = Vec::new();
    for a in 0..=attach {
        for b in (a + 1)..=attach {
            links.push((a, b));
            endpoints.extend([a, b]);
        }
    }
    for new in (attach + 1)..n_ports {
        let mut targets = BTreeSet::new();
        while targets.len() < attach {
            targets.insert(*endpoints.choose(&mut rng).expect("non-empty core"));
        }
        for t in targets {
            links.push((t, new));
            endpoints.extend([t, new]);
        }
    }

    let ports = (0..n_ports)
        .map(|i| PortRecord {
            port_id: port_id(i),
            name: format!("Port {i}"),
            lat: 0.0,
            lon: 0.0,
            ecoregion_id: format!("R{i}"),
            temperature: None,
            salinity: None,
        })
        .collect();

    let start = NaiveDate::from_ymd_opt(2005, 1, 1).expect("valid date");
    let mut voyages = Vec::with_capacity(2 * links.len());
    for (k, &(a, b)) in links.iter().enumerate() {
        for (from, to) in [(a, b), (b, a)] {
            let mut cursor = start;
            let (depart, arrive) = random_leg_dates(&mut rng, &mut cursor);
            voyages.push(VoyageLeg {
                vessel_id: format!("V{k:05}"),
                vessel_type: *VesselType::ALL.choose(&mut rng).expect("non-empty"),
                dwt: rng.gen_range(DWT_RANGE.0..=DWT_RANGE.1) as f64,
                origin: port_id(from),
                dest: port_id(to),
                depart,
                arrive,
            });
        }
    }
    Ok((ports, voyages))
}
