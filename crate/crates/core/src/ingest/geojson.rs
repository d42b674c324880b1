use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::{Map, Value};

use super::{evidence_point, Feature, FeatureSet, Geometry, IngestError, Provenance, SourceFormat};
use crate::evidence::Timestamp;
use crate::spatial::GeoPoint;

const FORMAT: SourceFormat = SourceFormat::GeoJson;

/// Coordinate rounding applied on export.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoordinatePrecision {
    /// At most seven decimal places (about 1 cm), the layer wire format.
    Decimals7,
    /// Shortest representation that round-trips the stored `f64`.
    Full,
}

/// Parses a GeoJSON FeatureCollection (or a single Feature) of points and
/// lines. Other geometry types are counted in `provenance.skipped_count`.
pub fn parse_geojson(bytes: &[u8]) -> Result<FeatureSet, IngestError> {
    parse_geojson_with_provenance(bytes).map(|(fs, _)| fs)
}

/// Like [`parse_geojson`], also returning the `provenance` foreign member if
/// the document carries one.
pub(crate) fn parse_geojson_with_provenance(bytes: &[u8]) -> Result<(FeatureSet, Option<Value>), IngestError> {
    let root: Value = serde_json::from_slice(bytes).map_err(|e| IngestError::MalformedDocument {
        format: FORMAT,
        line: u32::try_from(e.line()).ok().filter(|l| *l > 0),
        message: e.to_string(),
    })?;
    let obj = root.as_object().ok_or_else(|| malformed("top-level value is not an object"))?;

    let mut provenance = Provenance::for_bytes(FORMAT, bytes);
    let items: Vec<&Value> = match obj.get("type").and_then(Value::as_str) {
        Some("FeatureCollection") => obj
            .get("features")
            .and_then(Value::as_array)
            .ok_or_else(|| malformed("FeatureCollection without a features array"))?
            .iter()
            .collect(),
        Some("Feature") => vec![&root],
        Some(other) => return Err(malformed(format!("unsupported top-level type {other:?}"))),
        None => return Err(malformed("top-level object has no type")),
    };

    let mut features = Vec::with_capacity(items.len());
    for (index, item) in items.into_iter().enumerate() {
        match read_feature(index, item)? {
            Some(f) => features.push(f),
            None => provenance.skipped_count += 1,
        }
    }
    Ok((FeatureSet { features, provenance }, obj.get("provenance").cloned()))
}

fn malformed(message: impl Into<String>) -> IngestError {
    IngestError::MalformedDocument {
        format: FORMAT,
        line: None,
        message: message.into(),
    }
}

fn bad_coordinate(index: usize, detail: impl Into<String>) -> IngestError {
    IngestError::InvalidCoordinate {
        format: FORMAT,
        element: format!("features[{index}]"),
        line: None,
        detail: detail.into(),
    }
}

fn read_feature(index: usize, item: &Value) -> Result<Option<Feature>, IngestError> {
    let obj = item
        .as_object()
        .filter(|o| o.get("type").and_then(Value::as_str) == Some("Feature"))
        .ok_or_else(|| malformed(format!("features[{index}] is not a Feature object")))?;

    let Some(geom) = obj.get("geometry").and_then(Value::as_object) else {
        // null geometry: nothing to place on a map
        return Ok(None);
    };
    let coords = geom.get("coordinates");
    let geometry = match geom.get("type").and_then(Value::as_str) {
        Some("Point") => {
            let c = coords.ok_or_else(|| bad_coordinate(index, "Point without coordinates"))?;
            Geometry::Point(read_position(index, c)?)
        }
        Some("LineString") => {
            let arr = coords
                .and_then(Value::as_array)
                .ok_or_else(|| bad_coordinate(index, "LineString coordinates are not an array"))?;
            let pts = arr.iter().map(|c| read_position(index, c)).collect::<Result<Vec<_>, _>>()?;
            Geometry::line(pts).ok_or_else(|| bad_coordinate(index, "LineString needs at least 2 positions"))?
        }
        Some(_) => return Ok(None),
        None => return Err(malformed(format!("features[{index}] geometry has no type"))),
    };

    let mut f = Feature::new(geometry);
    if let Some(props) = obj.get("properties").and_then(Value::as_object) {
        f.properties = flatten_properties(props);
    }
    if let Some(ts) = obj.get("timestamp").and_then(Value::as_str) {
        f.timestamp = Some(super::parse_utc(ts).map_err(|_| IngestError::InvalidTimestamp {
            format: FORMAT,
            element: format!("features[{index}].timestamp"),
            line: None,
            value: ts.to_string(),
        })?);
    }
    Ok(Some(f))
}

fn read_position(index: usize, v: &Value) -> Result<GeoPoint, IngestError> {
    let arr = v
        .as_array()
        .filter(|a| (2..=3).contains(&a.len()))
        .ok_or_else(|| bad_coordinate(index, format!("position {v} is not [lon, lat(, alt)]")))?;
    let lon = arr[0].as_f64().ok_or_else(|| bad_coordinate(index, "longitude is not a number"))?;
    let lat = arr[1].as_f64().ok_or_else(|| bad_coordinate(index, "latitude is not a number"))?;
    evidence_point(lat, lon).map_err(|d| bad_coordinate(index, d))
}

fn flatten_properties(props: &Map<String, Value>) -> BTreeMap<String, String> {
    props
        .iter()
        .filter_map(|(k, v)| {
            let s = match v {
                Value::Null => return None,
                Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            Some((k.clone(), s))
        })
        .collect()
}

#[derive(Serialize)]
struct OutCollection<'a> {
    #[serde(rename = "type")]
    kind: &'static str,
    features: Vec<OutFeature<'a>>,
    provenance: &'a Provenance,
}

#[derive(Serialize)]
struct OutFeature<'a> {
    #[serde(rename = "type")]
    kind: &'static str,
    geometry: OutGeometry,
    properties: &'a BTreeMap<String, String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    timestamp: Option<&'a Timestamp>,
}

#[derive(Serialize)]
struct OutGeometry {
    #[serde(rename = "type")]
    kind: &'static str,
    coordinates: Value,
}

fn coord(v: f64, precision: CoordinatePrecision) -> Value {
    let v = match precision {
        CoordinatePrecision::Full => v,
        CoordinatePrecision::Decimals7 => {
            let r = (v * 1e7).round() / 1e7;
            if r == 0.0 { 0.0 } else { r }
        }
    };
    Value::from(v)
}

fn position(p: &GeoPoint, precision: CoordinatePrecision) -> Value {
    Value::Array(vec![coord(p.lon(), precision), coord(p.lat(), precision)])
}

/// RFC 7946 FeatureCollection with coordinates rounded to 7 decimals and
/// provenance carried as a foreign member.
pub fn export_geojson(fs: &FeatureSet) -> Vec<u8> {
    export_geojson_with(fs, CoordinatePrecision::Decimals7)
}

pub fn export_geojson_with(fs: &FeatureSet, precision: CoordinatePrecision) -> Vec<u8> {
    let features = fs
        .features
        .iter()
        .map(|f| OutFeature {
            kind: "Feature",
            geometry: OutGeometry {
                kind: f.geometry.type_name(),
                coordinates: match &f.geometry {
                    Geometry::Point(p) => position(p, precision),
                    Geometry::LineString(pts) => Value::Array(pts.iter().map(|p| position(p, precision)).collect()),
                },
            },
            properties: &f.properties,
            timestamp: f.timestamp.as_ref(),
        })
        .collect();
    let doc = OutCollection {
        kind: "FeatureCollection",
        features,
        provenance: &fs.provenance,
    };
    serde_json::to_vec(&doc).expect("GeoJSON serialization cannot fail")
}
