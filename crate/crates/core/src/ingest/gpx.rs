use roxmltree::Node;

use super::xml::{self, child, child_text, children, is};
use super::{
    evidence_point, format_utc, Feature, FeatureSet, Geometry, IngestError, Provenance,
    SourceFormat, TIMES_PROPERTY,
};
use crate::evidence::Timestamp;
use crate::spatial::GeoPoint;

const FORMAT: SourceFormat = SourceFormat::Gpx;

/// Parses a GPX 1.0/1.1 document.
///
/// Waypoints become points. Each track segment becomes a line whose vertex
/// times are kept in the `times` property; a segment with a single fix
/// becomes a point flagged `degenerate_track`.
pub fn parse_gpx(bytes: &[u8]) -> Result<FeatureSet, IngestError> {
    let doc = xml::parse_document(FORMAT, bytes)?;
    let root = doc.root_element();
    if !is(root, "gpx") {
        return Err(xml::malformed(FORMAT, root, format!("root element is <{}>, expected <gpx>", root.tag_name().name())));
    }

    let mut features = Vec::new();
    for node in root.children().filter(|n| n.is_element()) {
        match node.tag_name().name() {
            "wpt" => {
                let (position, time) = read_fix(node)?;
                let mut f = Feature::new(Geometry::Point(position));
                f.properties.insert("kind".into(), "waypoint".into());
                copy_common(node, &mut f);
                if let Some(t) = time {
                    f.properties.insert("time".into(), format_utc(&t));
                }
                f.timestamp = time;
                features.push(f);
            }
            "trk" => {
                let name = child_text(node, "name");
                for (seg_index, seg) in children(node, "trkseg").enumerate() {
                    let fixes = children(seg, "trkpt").map(read_fix).collect::<Result<Vec<_>, _>>()?;
                    if fixes.is_empty() {
                        continue;
                    }
                    features.push(segment_feature(&fixes, name.as_deref(), seg_index, node));
                }
            }
            _ => {}
        }
    }

    Ok(FeatureSet {
        features,
        provenance: Provenance::for_bytes(FORMAT, bytes),
    })
}

fn segment_feature(
    fixes: &[(GeoPoint, Option<Timestamp>)],
    name: Option<&str>,
    seg_index: usize,
    trk: Node<'_, '_>,
) -> Feature {
    let mut f = if fixes.len() == 1 {
        let mut f = Feature::new(Geometry::Point(fixes[0].0));
        f.properties.insert("degenerate_track".into(), "true".into());
        if let Some(t) = fixes[0].1 {
            f.properties.insert("time".into(), format_utc(&t));
        }
        f
    } else {
        let pts = fixes.iter().map(|(p, _)| *p).collect();
        let mut f = Feature::new(Geometry::LineString(pts));
        if fixes.iter().all(|(_, t)| t.is_some()) {
            let times: Vec<String> = fixes.iter().filter_map(|(_, t)| t.as_ref()).map(format_utc).collect();
            f.properties.insert(TIMES_PROPERTY.into(), times.join(","));
        }
        f
    };
    f.properties.insert("kind".into(), "track".into());
    f.properties.insert("segment".into(), seg_index.to_string());
    if let Some(n) = name {
        f.properties.insert("name".into(), n.to_string());
    }
    if let Some(desc) = child_text(trk, "desc") {
        f.properties.insert("desc".into(), desc);
    }
    f.timestamp = fixes[0].1;
    f
}

fn copy_common(node: Node<'_, '_>, f: &mut Feature) {
    for key in ["name", "desc", "ele", "cmt", "sym"] {
        if let Some(v) = child_text(node, key) {
            f.properties.insert(key.into(), v);
        }
    }
}

fn read_fix(node: Node<'_, '_>) -> Result<(GeoPoint, Option<Timestamp>), IngestError> {
    let attr = |name: &str| {
        node.attribute(name)
            .ok_or_else(|| xml::invalid_coordinate(FORMAT, node, format!("missing {name} attribute")))
    };
    let lat = xml::parse_number(FORMAT, node, attr("lat")?)?;
    let lon = xml::parse_number(FORMAT, node, attr("lon")?)?;
    let position = evidence_point(lat, lon).map_err(|d| xml::invalid_coordinate(FORMAT, node, d))?;
    let time = child(node, "time").map(|t| xml::parse_time(FORMAT, t)).transpose()?;
    Ok((position, time))
}
