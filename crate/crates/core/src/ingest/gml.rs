use roxmltree::Node;

use super::xml::{self, child, is};
use super::{evidence_point, Feature, FeatureSet, Geometry, IngestError, Provenance, SourceFormat};
use crate::spatial::GeoPoint;

const FORMAT: SourceFormat = SourceFormat::Gml;

const GML_NS: &[&str] = &["http://www.opengis.net/gml", "http://www.opengis.net/gml/3.2"];

const GEOMETRY_ELEMENTS: &[&str] = &[
    "Point",
    "LineString",
    "Polygon",
    "LinearRing",
    "Curve",
    "Surface",
    "MultiPoint",
    "MultiCurve",
    "MultiLineString",
    "MultiSurface",
    "MultiPolygon",
    "MultiGeometry",
    "GeometryCollection",
    "Envelope",
];

/// srsName spellings whose axis order is latitude first.
const ACCEPTED_CRS: &[&str] = &[
    "EPSG:4326",
    "urn:ogc:def:crs:EPSG::4326",
    "urn:ogc:def:crs:EPSG:6.6:4326",
    "urn:x-ogc:def:crs:EPSG:4326",
    "http://www.opengis.net/def/crs/EPSG/0/4326",
];

fn is_gml(node: Node<'_, '_>) -> bool {
    node.is_element() && node.tag_name().namespace().is_some_and(|ns| GML_NS.contains(&ns))
}

fn is_geometry(node: Node<'_, '_>) -> bool {
    is_gml(node) && GEOMETRY_ELEMENTS.contains(&node.tag_name().name())
}

/// Parses the Point/LineString subset of GML 3 in EPSG:4326.
///
/// `gml:pos` and `gml:posList` are read latitude first. Any other declared
/// CRS is refused with [`IngestError::UnsupportedCrs`]; other geometry types
/// are counted in `provenance.skipped_count`.
pub fn parse_gml(bytes: &[u8]) -> Result<FeatureSet, IngestError> {
    let doc = xml::parse_document(FORMAT, bytes)?;
    let mut provenance = Provenance::for_bytes(FORMAT, bytes);
    let mut features = Vec::new();

    for node in doc.root_element().descendants().filter(|n| is_geometry(*n)) {
        if node.ancestors().skip(1).any(is_geometry) {
            continue;
        }
        if node.tag_name().name() == "Envelope" {
            // bounding metadata, still subject to the CRS rule
            check_crs(node)?;
            continue;
        }
        let geometry = match node.tag_name().name() {
            "Point" => {
                check_crs(node)?;
                let pos = child(node, "pos").filter(|p| is_gml(*p)).ok_or_else(|| xml::malformed(FORMAT, node, "gml:Point without gml:pos"))?;
                let coords = read_positions(pos, dimension(node, pos)?)?;
                if coords.len() != 1 {
                    return Err(xml::invalid_coordinate(FORMAT, pos, format!("expected one position, found {}", coords.len())));
                }
                Geometry::Point(coords[0])
            }
            "LineString" => {
                check_crs(node)?;
                let coords = if let Some(list) = child(node, "posList").filter(|p| is_gml(*p)) {
                    read_positions(list, dimension(node, list)?)?
                } else {
                    let mut coords = Vec::new();
                    for pos in node.children().filter(|c| is_gml(*c) && is(*c, "pos")) {
                        coords.extend(read_positions(pos, dimension(node, pos)?)?);
                    }
                    coords
                };
                Geometry::line(coords).ok_or_else(|| xml::malformed(FORMAT, node, "gml:LineString needs at least 2 positions"))?
            }
            _ => {
                check_crs(node)?;
                provenance.skipped_count += 1;
                continue;
            }
        };
        let mut f = Feature::new(geometry);
        if let Some(feature_node) = owning_feature(node) {
            collect_properties(feature_node, &mut f);
        }
        features.push(f);
    }
    Ok(FeatureSet { features, provenance })
}

/// Nearest srsName on the geometry or its ancestors.
fn check_crs(node: Node<'_, '_>) -> Result<(), IngestError> {
    match node.ancestors().find_map(|n| n.attribute("srsName")) {
        None => Ok(()),
        Some(srs) if ACCEPTED_CRS.iter().any(|a| a.eq_ignore_ascii_case(srs.trim())) => Ok(()),
        Some(srs) => Err(IngestError::UnsupportedCrs(srs.to_string())),
    }
}

fn dimension(geom: Node<'_, '_>, pos: Node<'_, '_>) -> Result<usize, IngestError> {
    let raw = pos
        .attribute("srsDimension")
        .or_else(|| geom.ancestors().find_map(|n| n.attribute("srsDimension")));
    match raw.map(str::trim) {
        None | Some("2") => Ok(2),
        Some("3") => Ok(3),
        Some(other) => Err(xml::malformed(FORMAT, pos, format!("unsupported srsDimension {other:?}"))),
    }
}

fn read_positions(node: Node<'_, '_>, dim: usize) -> Result<Vec<GeoPoint>, IngestError> {
    let values = xml::text(node)
        .split_whitespace()
        .map(|v| xml::parse_number(FORMAT, node, v))
        .collect::<Result<Vec<f64>, _>>()?;
    if values.is_empty() || values.len() % dim != 0 {
        return Err(xml::invalid_coordinate(
            FORMAT,
            node,
            format!("{} ordinates do not form {dim}-dimensional positions", values.len()),
        ));
    }
    values
        .chunks(dim)
        .map(|c| evidence_point(c[0], c[1]).map_err(|d| xml::invalid_coordinate(FORMAT, node, d)))
        .collect()
}

/// The feature element that owns a geometry: the child of a
/// `featureMember(s)` ancestor, or else the geometry's grandparent.
fn owning_feature<'a, 'i>(geom: Node<'a, 'i>) -> Option<Node<'a, 'i>> {
    let mut prev = None;
    for anc in geom.ancestors().skip(1) {
        if is(anc, "featureMember") || is(anc, "featureMembers") || is(anc, "member") {
            return prev;
        }
        prev = Some(anc);
    }
    geom.parent().and_then(|p| p.parent()).filter(|n| n.is_element() && !is_geometry(*n))
}

fn collect_properties(feature: Node<'_, '_>, f: &mut Feature) {
    if let Some(id) = feature.attributes().find(|a| a.name() == "id").map(|a| a.value()) {
        f.properties.insert("gml_id".into(), id.to_string());
    }
    for c in feature.children().filter(|c| c.is_element()) {
        if c.children().any(|g| g.is_element()) {
            continue;
        }
        let value = xml::text(c);
        if !value.is_empty() {
            f.properties.entry(c.tag_name().name().to_string()).or_insert(value);
        }
    }
}
