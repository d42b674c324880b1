use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{seconds_between, AnalysisError};
use crate::evidence::{AnprDetection, BtDetection};
use crate::ingest::MacAddress;
use crate::spatial::haversine_distance;

/// Co-occurrence window: at most `dt_s` seconds and `d_m` meters apart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationParams {
    #[serde(alias = "delta_t_s", alias = "Δt_s")]
    pub dt_s: f64,
    pub d_m: f64,
}

impl Default for CorrelationParams {
    fn default() -> Self {
        CorrelationParams { dt_s: 60.0, d_m: 100.0 }
    }
}

impl CorrelationParams {
    pub fn validate(&self) -> Result<(), AnalysisError> {
        if !(self.dt_s.is_finite() && self.dt_s >= 0.0) {
            return Err(AnalysisError::InvalidParameters(format!("dt_s must be a finite number >= 0, got {}", self.dt_s)));
        }
        if !(self.d_m.is_finite() && self.d_m >= 0.0) {
            return Err(AnalysisError::InvalidParameters(format!("d_m must be a finite number >= 0, got {}", self.d_m)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationScore {
    pub mac: MacAddress,
    pub plate: String,
    pub co_occurrences: usize,
    /// Distinct Bluetooth sensors among the co-occurring detections.
    pub distinct_sensors: usize,
    /// `co_occurrences * distinct_sensors`.
    pub score: f64,
}

/// Whether a Bluetooth and an ANPR detection fall inside one window.
pub fn co_occur(b: &BtDetection, a: &AnprDetection, params: &CorrelationParams) -> bool {
    seconds_between(b.timestamp, a.timestamp).abs() <= params.dt_s
        && haversine_distance(b.position, a.position) <= params.d_m
}

/// Ranks (MAC, plate) pairs by how often and where they were seen together.
///
/// Each Bluetooth detection counts at most once per plate, however many
/// detections of that plate fall in its window. Output is ordered by score,
/// then co-occurrences (both descending), then MAC and plate.
pub fn correlate_bt_anpr(
    bt: &[BtDetection],
    anpr: &[AnprDetection],
    params: CorrelationParams,
) -> Result<Vec<AssociationScore>, AnalysisError> {
    params.validate()?;
    let mut by_time: Vec<&AnprDetection> = anpr.iter().collect();
    by_time.sort_by_key(|a| a.timestamp);

    // widened by a second so float rounding never drops a candidate; the
    // exact test is co_occur
    let slack = params.dt_s + 1.0;
    let mut tally: BTreeMap<(MacAddress, &str), (usize, BTreeSet<&str>)> = BTreeMap::new();
    for b in bt {
        let start = by_time.partition_point(|a| seconds_between(a.timestamp, b.timestamp) < -slack);
        let plates: BTreeSet<&str> = by_time[start..]
            .iter()
            .take_while(|a| seconds_between(a.timestamp, b.timestamp) <= slack)
            .filter(|a| co_occur(b, a, &params))
            .map(|a| a.plate.as_str())
            .collect();
        for plate in plates {
            let entry = tally.entry((b.mac, plate)).or_default();
            entry.0 += 1;
            entry.1.insert(b.sensor_id.as_str());
        }
    }

    let mut out: Vec<AssociationScore> = tally
        .into_iter()
        .map(|((mac, plate), (co, sensors))| AssociationScore {
            mac,
            plate: plate.to_string(),
            co_occurrences: co,
            distinct_sensors: sensors.len(),
            score: (co * sensors.len()) as f64,
        })
        .collect();
    out.sort_by(|x, y| {
        y.score
            .total_cmp(&x.score)
            .then(y.co_occurrences.cmp(&x.co_occurrences))
            .then(x.mac.cmp(&y.mac))
            .then_with(|| x.plate.cmp(&y.plate))
    });
    Ok(out)
}
