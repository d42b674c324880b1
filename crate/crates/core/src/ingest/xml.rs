use roxmltree::{Document, Node, ParsingOptions};

use super::{IngestError, SourceFormat};

pub(super) fn parse_document(format: SourceFormat, bytes: &[u8]) -> Result<Document<'_>, IngestError> {
    let text = std::str::from_utf8(bytes).map_err(|e| IngestError::MalformedDocument {
        format,
        line: None,
        message: format!("not UTF-8: {e}"),
    })?;
    let opts = ParsingOptions {
        allow_dtd: false,
        ..ParsingOptions::default()
    };
    Document::parse_with_options(text, opts).map_err(|e| IngestError::MalformedDocument {
        format,
        line: Some(e.pos().row),
        message: e.to_string(),
    })
}

pub(super) fn line_of(node: Node<'_, '_>) -> Option<u32> {
    Some(node.document().text_pos_at(node.range().start).row)
}

pub(super) fn is(node: Node<'_, '_>, local: &str) -> bool {
    node.is_element() && node.tag_name().name() == local
}

pub(super) fn child<'a, 'i>(node: Node<'a, 'i>, local: &str) -> Option<Node<'a, 'i>> {
    node.children().find(|c| is(*c, local))
}

pub(super) fn children<'a, 'i: 'a>(node: Node<'a, 'i>, local: &'a str) -> impl Iterator<Item = Node<'a, 'i>> + 'a {
    node.children().filter(move |c| is(*c, local))
}

/// Concatenated text content of a node, trimmed.
pub(super) fn text(node: Node<'_, '_>) -> String {
    node.descendants()
        .filter(|n| n.is_text())
        .filter_map(|n| n.text())
        .collect::<String>()
        .trim()
        .to_string()
}

pub(super) fn child_text(node: Node<'_, '_>, local: &str) -> Option<String> {
    child(node, local).map(text).filter(|s| !s.is_empty())
}

pub(super) fn malformed(format: SourceFormat, node: Node<'_, '_>, message: impl Into<String>) -> IngestError {
    IngestError::MalformedDocument {
        format,
        line: line_of(node),
        message: message.into(),
    }
}

pub(super) fn invalid_coordinate(format: SourceFormat, node: Node<'_, '_>, detail: impl Into<String>) -> IngestError {
    IngestError::InvalidCoordinate {
        format,
        element: node.tag_name().name().to_string(),
        line: line_of(node),
        detail: detail.into(),
    }
}

pub(super) fn parse_time(format: SourceFormat, node: Node<'_, '_>) -> Result<crate::evidence::Timestamp, IngestError> {
    let value = text(node);
    super::parse_utc(&value).map_err(|_| IngestError::InvalidTimestamp {
        format,
        element: node.tag_name().name().to_string(),
        line: line_of(node),
        value,
    })
}

pub(super) fn parse_number(format: SourceFormat, node: Node<'_, '_>, raw: &str) -> Result<f64, IngestError> {
    raw.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| invalid_coordinate(format, node, format!("{raw:?} is not a number")))
}
