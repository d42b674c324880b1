//! Evidence file parsers.
//!
//! GPX, KML, GML and GeoJSON documents become [`FeatureSet`]s; the four CSV
//! schemas become typed evidence records. Every parser is a pure function of
//! its input bytes and reports failures as [`IngestError`], never by
//! panicking.

mod csv_records;
mod geojson;
mod gml;
mod gpx;
mod kml;
mod mac;
mod xml;

use std::collections::BTreeMap;
use std::fmt;

use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::evidence::{GpsTrack, Timestamp, TrackPoint};
use crate::spatial::GeoPoint;

pub use csv_records::{
    parse_anpr_csv, parse_bt_csv, parse_camera_csv, parse_wifi_csv, CsvOutcome, CsvSchema,
    ImportMode, RowError,
};
pub use geojson::{export_geojson, export_geojson_with, parse_geojson, CoordinatePrecision};
pub(crate) use geojson::parse_geojson_with_provenance;
pub use gml::parse_gml;
pub use gpx::parse_gpx;
pub use kml::parse_kml;
pub use mac::{canonical_mac, MacAddress, MacParseError, MacQuery, Oui};

/// Property key holding per-vertex ISO-8601 times of a track line, joined by `,`.
pub const TIMES_PROPERTY: &str = "times";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SourceFormat {
    #[serde(rename = "GPX")]
    Gpx,
    #[serde(rename = "KML")]
    Kml,
    #[serde(rename = "GML")]
    Gml,
    #[serde(rename = "GeoJSON")]
    GeoJson,
    #[serde(rename = "CSV")]
    Csv,
}

impl fmt::Display for SourceFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SourceFormat::Gpx => "GPX",
            SourceFormat::Kml => "KML",
            SourceFormat::Gml => "GML",
            SourceFormat::GeoJson => "GeoJSON",
            SourceFormat::Csv => "CSV",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Geometry {
    Point(GeoPoint),
    /// Always at least two vertices.
    LineString(Vec<GeoPoint>),
}

impl Geometry {
    pub fn line(points: Vec<GeoPoint>) -> Option<Geometry> {
        (points.len() >= 2).then_some(Geometry::LineString(points))
    }

    pub fn points(&self) -> &[GeoPoint] {
        match self {
            Geometry::Point(p) => std::slice::from_ref(p),
            Geometry::LineString(v) => v,
        }
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            Geometry::Point(_) => "Point",
            Geometry::LineString(_) => "LineString",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Feature {
    pub geometry: Geometry,
    pub properties: BTreeMap<String, String>,
    pub timestamp: Option<Timestamp>,
}

impl Feature {
    pub fn new(geometry: Geometry) -> Self {
        Feature {
            geometry,
            properties: BTreeMap::new(),
            timestamp: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source_name: String,
    pub source_format: SourceFormat,
    pub import_time: Timestamp,
    /// Features dropped because their geometry type is not supported.
    #[serde(default)]
    pub skipped_count: usize,
    /// SHA-256 of the imported bytes, lowercase hex.
    pub content_sha256: String,
}

impl Provenance {
    pub fn for_bytes(format: SourceFormat, bytes: &[u8]) -> Self {
        Provenance {
            source_name: String::new(),
            source_format: format,
            import_time: Utc::now(),
            skipped_count: 0,
            content_sha256: content_sha256(bytes),
        }
    }
}

/// A normalized layer: features in source order plus where they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub features: Vec<Feature>,
    pub provenance: Provenance,
}

impl FeatureSet {
    pub fn with_source_name(mut self, name: impl Into<String>) -> Self {
        self.provenance.source_name = name.into();
        self
    }

    /// Timed tracks carried by this layer: every line whose vertices all have
    /// times, plus single-fix tracks recorded as degenerate points.
    pub fn tracks(&self) -> Vec<GpsTrack> {
        let mut out = Vec::new();
        for f in &self.features {
            let label = f.properties.get("name").cloned().unwrap_or_default();
            match &f.geometry {
                Geometry::LineString(pts) => {
                    let Some(times) = f.properties.get(TIMES_PROPERTY) else {
                        continue;
                    };
                    let parsed: Option<Vec<Timestamp>> =
                        times.split(',').map(|t| parse_utc(t).ok()).collect();
                    let Some(parsed) = parsed.filter(|p| p.len() == pts.len()) else {
                        continue;
                    };
                    let points = pts
                        .iter()
                        .zip(parsed)
                        .map(|(&position, timestamp)| TrackPoint { position, timestamp })
                        .collect();
                    if let Ok(t) = GpsTrack::new("", label, points) {
                        out.push(t);
                    }
                }
                Geometry::Point(p) => {
                    if f.properties.get("degenerate_track").map(String::as_str) != Some("true") {
                        continue;
                    }
                    if let Some(ts) = f.timestamp {
                        let point = TrackPoint { position: *p, timestamp: ts };
                        out.extend(GpsTrack::new("", label, vec![point]));
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IngestError {
    #[error("{format}: malformed document{}: {message}", at_line(*.line))]
    MalformedDocument {
        format: SourceFormat,
        line: Option<u32>,
        message: String,
    },
    #[error("{format}: invalid coordinate in <{element}>{}: {detail}", at_line(*.line))]
    InvalidCoordinate {
        format: SourceFormat,
        element: String,
        line: Option<u32>,
        detail: String,
    },
    #[error("{format}: invalid timestamp {value:?} in <{element}>{}: an explicit UTC offset is required", at_line(*.line))]
    InvalidTimestamp {
        format: SourceFormat,
        element: String,
        line: Option<u32>,
        value: String,
    },
    #[error("GML: unsupported CRS {0:?}, only EPSG:4326 is accepted")]
    UnsupportedCrs(String),
    #[error("{schema} CSV: header is missing column {column:?}")]
    MissingHeader { schema: CsvSchema, column: String },
    #[error("{schema} CSV: {} bad row(s): {}", .rows.len(), summarize_rows(.rows))]
    BadRows { schema: CsvSchema, rows: Vec<RowError> },
}

impl IngestError {
    /// Stable machine-readable error class.
    pub fn code(&self) -> &'static str {
        match self {
            IngestError::MalformedDocument { .. } => "MalformedDocument",
            IngestError::InvalidCoordinate { .. } => "InvalidCoordinate",
            IngestError::InvalidTimestamp { .. } => "InvalidTimestamp",
            IngestError::UnsupportedCrs(_) => "UnsupportedCrs",
            IngestError::MissingHeader { .. } => "MissingHeader",
            IngestError::BadRows { .. } => "BadRow",
        }
    }
}

fn at_line(line: Option<u32>) -> String {
    line.map(|l| format!(" at line {l}")).unwrap_or_default()
}

fn summarize_rows(rows: &[RowError]) -> String {
    const SHOWN: usize = 5;
    let mut s = rows
        .iter()
        .take(SHOWN)
        .map(|r| r.to_string())
        .collect::<Vec<_>>()
        .join("; ");
    if rows.len() > SHOWN {
        s.push_str(&format!("; and {} more", rows.len() - SHOWN));
    }
    s
}

pub fn content_sha256(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Parses an RFC 3339 instant. Inputs without an offset are rejected.
pub fn parse_utc(s: &str) -> Result<Timestamp, chrono::ParseError> {
    chrono::DateTime::parse_from_rfc3339(s.trim()).map(|t| t.with_timezone(&Utc))
}

pub fn format_utc(t: &Timestamp) -> String {
    t.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

/// Builds a point from evidence input, rejecting rather than wrapping
/// out-of-range longitudes.
pub(crate) fn evidence_point(lat: f64, lon: f64) -> Result<GeoPoint, String> {
    if !lon.is_finite() || !(-180.0..=180.0).contains(&lon) {
        return Err(format!("longitude {lon} out of range"));
    }
    GeoPoint::new(lat, lon).map_err(|_| format!("latitude {lat} out of range"))
}
