//! Typed evidence records shared by the parsers, the case store and the
//! analyses.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::ingest::MacAddress;
use crate::spatial::GeoPoint;

pub type Timestamp = DateTime<Utc>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CameraCategory {
    Public,
    Private,
    Unknown,
}

impl CameraCategory {
    /// Case-insensitive mapping; anything unrecognised is `Unknown`.
    pub fn from_label(s: &str) -> CameraCategory {
        match s.trim().to_ascii_lowercase().as_str() {
            "public" => CameraCategory::Public,
            "private" => CameraCategory::Private,
            _ => CameraCategory::Unknown,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            CameraCategory::Public => "public",
            CameraCategory::Private => "private",
            CameraCategory::Unknown => "unknown",
        }
    }
}

impl fmt::Display for CameraCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CameraCategory {
    type Err = String;

    /// Strict parse used for query parameters.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "public" => Ok(CameraCategory::Public),
            "private" => Ok(CameraCategory::Private),
            "unknown" => Ok(CameraCategory::Unknown),
            other => Err(format!("unknown camera category {other:?}")),
        }
    }
}

/// A registered surveillance camera overlooking public space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraRecord {
    pub camera_id: String,
    pub position: GeoPoint,
    pub category: CameraCategory,
    pub owner_contact: String,
    pub description: String,
    pub source: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WifiObservation {
    pub bssid: MacAddress,
    pub ssid: Option<String>,
    pub position: GeoPoint,
    pub timestamp: Timestamp,
    pub signal_dbm: Option<i32>,
}

/// One wardriving capture session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WifiScan {
    pub scan_id: String,
    pub label: String,
    pub captured_from: Option<Timestamp>,
    pub captured_to: Option<Timestamp>,
    pub observations: Vec<WifiObservation>,
}

impl WifiScan {
    /// Builds a scan with its capture range derived from the observations.
    pub fn new(scan_id: impl Into<String>, label: impl Into<String>, observations: Vec<WifiObservation>) -> Self {
        let mut scan = WifiScan {
            scan_id: scan_id.into(),
            label: label.into(),
            captured_from: None,
            captured_to: None,
            observations,
        };
        scan.derive_range();
        scan
    }

    pub fn derive_range(&mut self) {
        self.captured_from = self.observations.iter().map(|o| o.timestamp).min();
        self.captured_to = self.observations.iter().map(|o| o.timestamp).max();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackPoint {
    pub position: GeoPoint,
    pub timestamp: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpsTrack {
    pub track_id: String,
    pub label: String,
    pub points: Vec<TrackPoint>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TrackError {
    Empty,
    NotMonotonic { index: usize },
}

impl fmt::Display for TrackError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrackError::Empty => f.write_str("track has no points"),
            TrackError::NotMonotonic { index } => {
                write!(f, "track timestamps decrease at point {index}")
            }
        }
    }
}

impl std::error::Error for TrackError {}

impl GpsTrack {
    pub fn new(track_id: impl Into<String>, label: impl Into<String>, points: Vec<TrackPoint>) -> Result<Self, TrackError> {
        let track = GpsTrack {
            track_id: track_id.into(),
            label: label.into(),
            points,
        };
        track.validate()?;
        Ok(track)
    }

    /// Checks the stored-track invariants: at least one point, timestamps
    /// non-decreasing.
    pub fn validate(&self) -> Result<(), TrackError> {
        if self.points.is_empty() {
            return Err(TrackError::Empty);
        }
        match self
            .points
            .windows(2)
            .position(|w| w[1].timestamp < w[0].timestamp)
        {
            Some(i) => Err(TrackError::NotMonotonic { index: i + 1 }),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BtDetection {
    pub mac: MacAddress,
    pub sensor_id: String,
    pub position: GeoPoint,
    pub timestamp: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnprDetection {
    pub plate: String,
    pub sensor_id: String,
    pub position: GeoPoint,
    pub timestamp: Timestamp,
}

/// Uppercases a plate and removes all whitespace.
pub fn normalize_plate(raw: &str) -> String {
    raw.chars()
        .filter(|c| !c.is_whitespace())
        .flat_map(char::to_uppercase)
        .collect()
}
