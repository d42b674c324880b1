//! Parse-and-store for one uploaded evidence file.

use std::fmt;
use std::str::FromStr;

use chrono::Utc;
use serde::Serialize;
use thiserror::Error;

use crate::ingest::{
    content_sha256, parse_anpr_csv, parse_bt_csv, parse_camera_csv, parse_geojson, parse_gml, parse_gpx, parse_kml,
    parse_wifi_csv, ImportMode, IngestError, RowError, SourceFormat,
};
use crate::store::{EvidenceStore, ImportRecord, StoreError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImportFormat {
    Gpx,
    Kml,
    Gml,
    Geojson,
    WifiCsv,
    AnprCsv,
    BtCsv,
    CameraCsv,
}

impl ImportFormat {
    pub const ALL: [ImportFormat; 8] = [
        ImportFormat::Gpx,
        ImportFormat::Kml,
        ImportFormat::Gml,
        ImportFormat::Geojson,
        ImportFormat::WifiCsv,
        ImportFormat::AnprCsv,
        ImportFormat::BtCsv,
        ImportFormat::CameraCsv,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ImportFormat::Gpx => "gpx",
            ImportFormat::Kml => "kml",
            ImportFormat::Gml => "gml",
            ImportFormat::Geojson => "geojson",
            ImportFormat::WifiCsv => "wifi",
            ImportFormat::AnprCsv => "anpr",
            ImportFormat::BtCsv => "bt",
            ImportFormat::CameraCsv => "camera",
        }
    }

    /// Best guess from a file name; CSV needs an explicit schema.
    pub fn from_extension(name: &str) -> Option<ImportFormat> {
        let ext = name.rsplit_once('.')?.1.to_ascii_lowercase();
        match ext.as_str() {
            "gpx" => Some(ImportFormat::Gpx),
            "kml" => Some(ImportFormat::Kml),
            "gml" => Some(ImportFormat::Gml),
            "geojson" | "json" => Some(ImportFormat::Geojson),
            _ => None,
        }
    }
}

impl Serialize for ImportFormat {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl fmt::Display for ImportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown import format {0:?}")]
pub struct UnknownFormat(pub String);

impl FromStr for ImportFormat {
    type Err = UnknownFormat;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase().replace('_', "-");
        let name = lower.strip_suffix("-csv").unwrap_or(&lower);
        ImportFormat::ALL
            .into_iter()
            .find(|f| f.as_str() == name)
            .ok_or_else(|| UnknownFormat(s.to_string()))
    }
}

#[derive(Debug, Error)]
pub enum ImportError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// What one import created.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImportSummary {
    pub case_id: String,
    pub format: ImportFormat,
    pub label: String,
    pub content_sha256: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub layer_id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub feature_count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scan_id: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub track_ids: Vec<String>,
    /// Features, observations, detections or cameras stored.
    pub records: usize,
    /// Features with unsupported geometry types.
    pub skipped_features: usize,
    /// CSV rows dropped in lenient mode.
    pub skipped_rows: Vec<RowError>,
}

pub struct ImportRequest<'a> {
    pub case_id: &'a str,
    pub format: ImportFormat,
    pub label: &'a str,
    pub source_name: &'a str,
    pub mode: ImportMode,
}

/// Parses `bytes` and stores the result in the case. Nothing is stored when
/// parsing fails.
pub fn import_bytes(store: &EvidenceStore, req: &ImportRequest<'_>, bytes: &[u8]) -> Result<ImportSummary, ImportError> {
    // fail before parsing when the case is unknown
    store.snapshot().case(req.case_id)?;
    let mut summary = ImportSummary {
        case_id: req.case_id.to_string(),
        format: req.format,
        label: req.label.to_string(),
        content_sha256: content_sha256(bytes),
        layer_id: None,
        feature_count: None,
        scan_id: None,
        track_ids: Vec::new(),
        records: 0,
        skipped_features: 0,
        skipped_rows: Vec::new(),
    };
    let layer = match req.format {
        ImportFormat::Gpx => Some(parse_gpx(bytes)?),
        ImportFormat::Kml => Some(parse_kml(bytes)?),
        ImportFormat::Gml => Some(parse_gml(bytes)?),
        ImportFormat::Geojson => Some(parse_geojson(bytes)?),
        _ => None,
    };
    if let Some(layer) = layer {
        let layer = layer.with_source_name(req.source_name);
        let tracks = if layer.provenance.source_format == SourceFormat::Gpx { layer.tracks() } else { Vec::new() };
        summary.records = layer.features.len();
        summary.feature_count = Some(layer.features.len());
        summary.skipped_features = layer.provenance.skipped_count;
        let (layer_id, track_ids) = store.add_layer_with_tracks(req.case_id, layer, req.label, tracks)?;
        summary.layer_id = Some(layer_id);
        summary.track_ids = track_ids;
    } else {
        match req.format {
            ImportFormat::WifiCsv => {
                let out = parse_wifi_csv(bytes, req.mode)?;
                let mut scan = out.records;
                scan.label = req.label.to_string();
                summary.records = scan.observations.len();
                summary.skipped_rows = out.skipped;
                summary.scan_id = Some(store.store_scan(req.case_id, scan)?);
            }
            ImportFormat::AnprCsv => {
                let out = parse_anpr_csv(bytes, req.mode)?;
                summary.skipped_rows = out.skipped;
                summary.records = store.store_anpr_detections(req.case_id, out.records)?;
            }
            ImportFormat::BtCsv => {
                let out = parse_bt_csv(bytes, req.mode)?;
                summary.skipped_rows = out.skipped;
                summary.records = store.store_bt_detections(req.case_id, out.records)?;
            }
            ImportFormat::CameraCsv => {
                let out = parse_camera_csv(bytes, req.mode)?;
                summary.skipped_rows = out.skipped;
                summary.records = store.upsert_cameras(out.records)?;
            }
            _ => unreachable!("document formats handled above"),
        }
    }

    let created_ids = summary.layer_id.iter().chain(&summary.scan_id).chain(&summary.track_ids).cloned().collect();
    store.record_import(
        req.case_id,
        ImportRecord {
            format: req.format.to_string(),
            label: req.label.to_string(),
            content_sha256: summary.content_sha256.clone(),
            imported_at: Utc::now(),
            records: summary.records,
            skipped_rows: summary.skipped_rows.len(),
            created_ids,
        },
    )?;
    Ok(summary)
}
