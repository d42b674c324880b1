use serde::{Deserialize, Serialize};

use super::{seconds_between, AnalysisError};
use crate::evidence::{GpsTrack, Timestamp};
use crate::spatial::{haversine_distance, normalize_lon, GeoPoint};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopParams {
    #[serde(default = "default_epsilon")]
    pub epsilon_m: f64,
    #[serde(default = "default_tau")]
    pub tau_s: f64,
}

fn default_epsilon() -> f64 {
    50.0
}

fn default_tau() -> f64 {
    300.0
}

impl Default for StopParams {
    fn default() -> Self {
        StopParams { epsilon_m: default_epsilon(), tau_s: default_tau() }
    }
}

/// A span of a track during which every fix stayed within `epsilon_m` of
/// the span's first fix (the anchor) for at least `tau_s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopSegment {
    /// Arithmetic mean of the spanned fixes.
    pub centroid: GeoPoint,
    pub anchor: GeoPoint,
    pub start: Timestamp,
    pub end: Timestamp,
    /// `end - start` in seconds.
    pub dwell: f64,
    /// Indices of the first and last spanned fix, inclusive.
    pub point_span: (usize, usize),
}

/// Mean position, averaging longitudes as offsets from the first point so
/// that a cluster straddling the antimeridian stays where it is.
fn centroid(points: &[GeoPoint]) -> GeoPoint {
    let base = points[0].lon();
    let n = points.len() as f64;
    let lat = points.iter().map(|p| p.lat()).sum::<f64>() / n;
    let dlon = points
        .iter()
        .map(|p| {
            let d = p.lon() - base;
            if d > 180.0 {
                d - 360.0
            } else if d < -180.0 {
                d + 360.0
            } else {
                d
            }
        })
        .sum::<f64>()
        / n;
    GeoPoint::new(lat.clamp(-90.0, 90.0), normalize_lon(base + dlon)).expect("mean of valid points is valid")
}

/// Stay-point sweep. From anchor `i`, extend over consecutive fixes while
/// they stay within `epsilon_m` of fix `i`; if the extension lasts at least
/// `tau_s` it is a stop and the sweep resumes after it, otherwise the anchor
/// advances by one.
pub fn detect_stops(track: &GpsTrack, params: StopParams) -> Result<Vec<StopSegment>, AnalysisError> {
    if !(params.epsilon_m.is_finite() && params.epsilon_m > 0.0) {
        return Err(AnalysisError::InvalidParameters(format!("epsilon_m must be > 0, got {}", params.epsilon_m)));
    }
    if !(params.tau_s.is_finite() && params.tau_s > 0.0) {
        return Err(AnalysisError::InvalidParameters(format!("tau_s must be > 0, got {}", params.tau_s)));
    }
    if track.points.is_empty() {
        return Err(AnalysisError::InvalidParameters("track has no points".into()));
    }
    let pts = &track.points;
    let mut stops = Vec::new();
    let mut i = 0;
    while i < pts.len() {
        let anchor = pts[i];
        let mut j = i;
        while j + 1 < pts.len() && haversine_distance(pts[j + 1].position, anchor.position) <= params.epsilon_m {
            j += 1;
        }
        let dwell = seconds_between(pts[j].timestamp, anchor.timestamp);
        if dwell >= params.tau_s {
            let positions: Vec<GeoPoint> = pts[i..=j].iter().map(|p| p.position).collect();
            stops.push(StopSegment {
                centroid: centroid(&positions),
                anchor: anchor.position,
                start: anchor.timestamp,
                end: pts[j].timestamp,
                dwell,
                point_span: (i, j),
            });
            i = j + 1;
        } else {
            i += 1;
        }
    }
    Ok(stops)
}

/// The fixes with `from <= t <= to`, in order. Open bounds are unbounded.
/// The result may have no points.
pub fn timeline_slice(track: &GpsTrack, from: Option<Timestamp>, to: Option<Timestamp>) -> Result<GpsTrack, AnalysisError> {
    if let (Some(f), Some(t)) = (from, to) {
        if f > t {
            return Err(AnalysisError::InvalidParameters(format!("from ({f}) is after to ({t})")));
        }
    }
    Ok(GpsTrack {
        track_id: track.track_id.clone(),
        label: track.label.clone(),
        points: track
            .points
            .iter()
            .filter(|p| from.is_none_or(|f| p.timestamp >= f) && to.is_none_or(|t| p.timestamp <= t))
            .copied()
            .collect(),
    })
}
