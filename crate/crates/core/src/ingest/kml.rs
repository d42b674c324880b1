use roxmltree::Node;

use super::xml::{self, child, child_text, is};
use super::{
    evidence_point, format_utc, Feature, FeatureSet, Geometry, IngestError, Provenance,
    SourceFormat,
};
use crate::spatial::GeoPoint;

const FORMAT: SourceFormat = SourceFormat::Kml;

const SKIPPED_GEOMETRIES: &[&str] = &["Polygon", "MultiGeometry", "LinearRing", "Model", "Track", "MultiTrack"];

/// Parses the Point/LineString subset of KML 2.2.
///
/// Coordinates are `lon,lat[,alt]` tuples. Placemarks with other geometry
/// types are counted in `provenance.skipped_count`.
pub fn parse_kml(bytes: &[u8]) -> Result<FeatureSet, IngestError> {
    let doc = xml::parse_document(FORMAT, bytes)?;
    let root = doc.root_element();
    if !is(root, "kml") && !is(root, "Document") && !is(root, "Folder") && !is(root, "Placemark") {
        return Err(xml::malformed(FORMAT, root, format!("unexpected root element <{}>", root.tag_name().name())));
    }

    let mut provenance = Provenance::for_bytes(FORMAT, bytes);
    let mut features = Vec::new();
    for pm in root.descendants().filter(|n| is(*n, "Placemark")) {
        let geometry = if let Some(point) = child(pm, "Point") {
            let coords = read_coordinates(point)?;
            if coords.len() != 1 {
                return Err(xml::malformed(FORMAT, point, format!("Point has {} coordinate tuples", coords.len())));
            }
            Geometry::Point(coords[0])
        } else if let Some(line) = child(pm, "LineString") {
            let coords = read_coordinates(line)?;
            Geometry::line(coords).ok_or_else(|| xml::malformed(FORMAT, line, "LineString needs at least 2 coordinates"))?
        } else {
            if pm.children().any(|c| SKIPPED_GEOMETRIES.iter().any(|g| is(c, g))) {
                provenance.skipped_count += 1;
            }
            continue;
        };

        let mut f = Feature::new(geometry);
        for key in ["name", "description"] {
            if let Some(v) = child_text(pm, key) {
                f.properties.insert(key.into(), v);
            }
        }
        if let Some(when) = child(pm, "TimeStamp").and_then(|ts| child(ts, "when")) {
            let t = xml::parse_time(FORMAT, when)?;
            f.properties.insert("time".into(), format_utc(&t));
            f.timestamp = Some(t);
        }
        if let Some(ext) = child(pm, "ExtendedData") {
            read_extended_data(ext, &mut f);
        }
        features.push(f);
    }

    Ok(FeatureSet { features, provenance })
}

fn read_extended_data(ext: Node<'_, '_>, f: &mut Feature) {
    for n in ext.descendants() {
        if is(n, "Data") {
            if let (Some(name), Some(value)) = (n.attribute("name"), child_text(n, "value")) {
                f.properties.entry(name.to_string()).or_insert(value);
            }
        } else if is(n, "SimpleData") {
            if let Some(name) = n.attribute("name") {
                f.properties.entry(name.to_string()).or_insert_with(|| xml::text(n));
            }
        }
    }
}

fn read_coordinates(geom: Node<'_, '_>) -> Result<Vec<GeoPoint>, IngestError> {
    let node = child(geom, "coordinates")
        .ok_or_else(|| xml::malformed(FORMAT, geom, format!("<{}> without <coordinates>", geom.tag_name().name())))?;
    let raw = xml::text(node);
    raw.split_whitespace()
        .map(|tuple| {
            let parts: Vec<&str> = tuple.split(',').collect();
            if !(2..=3).contains(&parts.len()) {
                return Err(xml::invalid_coordinate(FORMAT, node, format!("tuple {tuple:?} is not lon,lat[,alt]")));
            }
            let lon = xml::parse_number(FORMAT, node, parts[0])?;
            let lat = xml::parse_number(FORMAT, node, parts[1])?;
            evidence_point(lat, lon).map_err(|d| xml::invalid_coordinate(FORMAT, node, d))
        })
        .collect()
}
