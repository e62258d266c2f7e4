//! Per-vessel-type discharge regressions on dead-weight tonnage.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{DischargeEvent, VesselType};

#[derive(Debug, Error, PartialEq)]
pub enum BallastError {
    #[error("need at least 2 usable discharge events, got {0}")]
    InsufficientData(usize),
    #[error("all discharge events share the same dwt")]
    DegenerateDwt,
}

/// Ordinary least-squares line `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub intercept: f64,
    pub slope: f64,
    pub n: usize,
    /// Residual standard error, `sqrt(SSR / (n - 2))`; zero when `n == 2`.
    pub rse: f64,
}

impl LinearFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

/// Fits an affine line. Returns `None` unless there are at least two distinct x values.
///
/// Points are sorted before accumulation so the result does not depend on input order.
pub fn least_squares(points: &[(f64, f64)]) -> Option<LinearFit> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let n = pts.len();
    if n < 2 || pts[0].0 == pts[n - 1].0 {
        return None;
    }
    let nf = n as f64;
    let x_mean = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let y_mean = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for &(x, y) in &pts {
        let dx = x - x_mean;
        sxx += dx * dx;
        sxy += dx * (y - y_mean);
    }
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let ssr: f64 = pts
        .iter()
        .map(|&(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    let rse = if n > 2 { (ssr / (nf - 2.0)).sqrt() } else { 0.0 };
    Some(LinearFit {
        intercept,
        slope,
        n,
        rse,
    })
}

/// Fitted discharge predictors: one line per vessel type with enough data,
/// plus a pooled line over every event.
#[derive(Debug, Clone, PartialEq)]
pub struct DischargeModel {
    pub per_type: BTreeMap<VesselType, LinearFit>,
    pub pooled: LinearFit,
}

pub fn fit_discharge_models(events: &[DischargeEvent]) -> Result<DischargeModel, BallastError> {
    let usable: Vec<&DischargeEvent> = events
        .iter()
        .filter(|e| e.dwt > 0.0 && e.discharge > 0.0 && e.dwt.is_finite() && e.discharge.is_finite())
        .collect();
    if usable.len() < 2 {
        return Err(BallastError::InsufficientData(usable.len()));
    }
    let all: Vec<(f64, f64)> = usable.iter().map(|e| (e.dwt, e.discharge)).collect();
    let pooled = least_squares(&all).ok_or(BallastError::DegenerateDwt)?;

    let mut groups: BTreeMap<VesselType, Vec<(f64, f64)>> = BTreeMap::new();
    for e in &usable {
        groups
            .entry(e.vessel_type)
            .or_default()
            .push((e.dwt, e.discharge));
    }
    let per_type = groups
        .into_iter()
        .filter_map(|(t, pts)| least_squares(&pts).map(|fit| (t, fit)))
        .collect();
    Ok(DischargeModel { per_type, pooled })
}

impl DischargeModel {
    pub fn model_for(&self, vessel_type: VesselType) -> &LinearFit {
        self.per_type.get(&vessel_type).unwrap_or(&self.pooled)
    }

    /// Predicted discharge in m³, clamped at zero.
    pub fn predict(&self, vessel_type: VesselType, dwt: f64) -> f64 {
        self.model_for(vessel_type).eval(dwt).max(0.0)
    }

    /// `{vessel_type: {intercept, slope, n, rse}}`, with the pooled fit under `"Pooled"`.
    pub fn to_json(&self) -> serde_json::Value {
        let mut map = serde_json::Map::new();
        for (t, fit) in &self.per_type {
            map.insert(t.to_string(), serde_json::to_value(fit).expect("plain struct"));
        }
        map.insert(
            "Pooled".to_owned(),
            serde_json::to_value(self.pooled).expect("plain struct"),
        );
        serde_json::Value::Object(map)
    }
}

pub fn predict_discharge(model: &DischargeModel, vessel_type: VesselType, dwt: f64) -> f64 {
    model.predict(vessel_type, dwt)
}
