use std::collections::BTreeMap;
use std::fmt::Write as _;

use quick_xml::escape::escape;
use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;
use serde::{Deserialize, Serialize};

use super::{AnnotationError, ParsedAnnotations, RegionIssue, RegionRecord, Vertex};

/// Element and attribute names used to read an annotation file.
///
/// Defaults follow the ASAP layout:
/// `Annotations > Annotation[PartOfGroup] > Coordinates > Coordinate[Order, X, Y]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SchemaMapping {
    pub annotation_tag: String,
    pub coordinate_tag: String,
    pub label_attr: String,
    /// Attribute holding an integer region id. Regions without it are
    /// numbered by their position in the file.
    pub id_attr: String,
    pub x_attr: String,
    pub y_attr: String,
    pub order_attr: String,
    /// Multiplier applied to every coordinate on read (divided out on write).
    pub coordinate_scale: f64,
    /// Accepted labels. Empty means every label is accepted.
    pub classes: Vec<String>,
}

impl Default for SchemaMapping {
    fn default() -> Self {
        Self {
            annotation_tag: "Annotation".into(),
            coordinate_tag: "Coordinate".into(),
            label_attr: "PartOfGroup".into(),
            id_attr: "Id".into(),
            x_attr: "X".into(),
            y_attr: "Y".into(),
            order_attr: "Order".into(),
            coordinate_scale: 1.0,
            classes: vec!["Benign".into(), "InSitu".into(), "Invasive".into()],
        }
    }
}

impl SchemaMapping {
    pub fn with_classes<S: Into<String>>(mut self, classes: impl IntoIterator<Item = S>) -> Self {
        self.classes = classes.into_iter().map(Into::into).collect();
        self
    }

    fn accepts(&self, label: &str) -> bool {
        self.classes.is_empty() || self.classes.iter().any(|c| c == label)
    }
}

#[derive(Default)]
struct PendingRegion {
    attrs: BTreeMap<String, String>,
    vertices: Vec<(Option<f64>, f64, f64)>,
}

fn xml_error<R>(reader: &Reader<R>, message: impl ToString) -> AnnotationError {
    AnnotationError::Xml {
        offset: reader.error_position(),
        message: message.to_string(),
    }
}

fn attributes<R>(
    reader: &Reader<R>,
    e: &BytesStart<'_>,
) -> Result<BTreeMap<String, String>, AnnotationError> {
    let mut out = BTreeMap::new();
    for attr in e.attributes() {
        let attr = attr.map_err(|err| AnnotationError::Xml {
            offset: reader.buffer_position(),
            message: err.to_string(),
        })?;
        let key = String::from_utf8_lossy(attr.key.as_ref()).into_owned();
        let value = attr
            .unescape_value()
            .map_err(|err| AnnotationError::Xml {
                offset: reader.buffer_position(),
                message: err.to_string(),
            })?
            .into_owned();
        out.insert(key, value);
    }
    Ok(out)
}

fn parse_number(
    reader: &Reader<&[u8]>,
    attrs: &BTreeMap<String, String>,
    name: &str,
) -> Result<Option<f64>, AnnotationError> {
    match attrs.get(name) {
        None => Ok(None),
        Some(raw) => raw.trim().parse::<f64>().map(Some).map_err(|_| AnnotationError::Xml {
            offset: reader.buffer_position(),
            message: format!("attribute {name}=\"{raw}\" is not a number"),
        }),
    }
}

/// Parses an annotation document into region records.
///
/// Malformed XML is a hard error. Regions that fail validation are left out
/// of `regions` and reported in `issues`; regions whose label is outside the
/// configured class set are kept and flagged.
pub fn parse_annotations(
    xml_bytes: &[u8],
    schema: &SchemaMapping,
) -> Result<ParsedAnnotations, AnnotationError> {
    let mut reader = Reader::from_reader(xml_bytes);
    reader.config_mut().trim_text(true);

    let mut pending: Vec<PendingRegion> = Vec::new();
    let mut current: Option<PendingRegion> = None;
    let mut depth: usize = 0;
    let mut annotation_depth: Option<usize> = None;

    loop {
        let event = reader.read_event().map_err(|e| xml_error(&reader, e))?;
        match event {
            Event::Start(ref e) | Event::Empty(ref e) => {
                let is_empty = matches!(event, Event::Empty(_));
                let name = e.local_name();
                let name = name.as_ref();
                if name == schema.annotation_tag.as_bytes() {
                    if current.is_some() {
                        return Err(xml_error(&reader, "nested annotation element"));
                    }
                    let region = PendingRegion {
                        attrs: attributes(&reader, e)?,
                        vertices: Vec::new(),
                    };
                    if is_empty {
                        pending.push(region);
                    } else {
                        current = Some(region);
                        annotation_depth = Some(depth);
                    }
                } else if name == schema.coordinate_tag.as_bytes() {
                    if let Some(region) = current.as_mut() {
                        let attrs = attributes(&reader, e)?;
                        let x = parse_number(&reader, &attrs, &schema.x_attr)?;
                        let y = parse_number(&reader, &attrs, &schema.y_attr)?;
                        let order = parse_number(&reader, &attrs, &schema.order_attr)?;
                        match (x, y) {
                            (Some(x), Some(y)) => region.vertices.push((
                                order,
                                x * schema.coordinate_scale,
                                y * schema.coordinate_scale,
                            )),
                            _ => {
                                return Err(xml_error(
                                    &reader,
                                    format!(
                                        "coordinate missing {} or {} attribute",
                                        schema.x_attr, schema.y_attr
                                    ),
                                ))
                            }
                        }
                    }
                }
                if !is_empty {
                    depth += 1;
                }
            }
            Event::End(_) => {
                depth = depth.saturating_sub(1);
                if annotation_depth == Some(depth) {
                    annotation_depth = None;
                    if let Some(region) = current.take() {
                        pending.push(region);
                    }
                }
            }
            Event::Eof => break,
            _ => {}
        }
    }
    if current.is_some() {
        return Err(xml_error(&reader, "unterminated annotation element"));
    }

    let mut out = ParsedAnnotations::default();
    for (ordinal, mut region) in pending.into_iter().enumerate() {
        let region_id = region
            .attrs
            .remove(&schema.id_attr)
            .and_then(|v| v.trim().parse::<i64>().ok())
            .unwrap_or(ordinal as i64);
        let label = region.attrs.remove(&schema.label_attr).unwrap_or_default();

        if region.vertices.iter().all(|v| v.0.is_some()) {
            // Stable, so duplicate orders keep document order.
            region
                .vertices
                .sort_by(|a, b| a.0.unwrap().total_cmp(&b.0.unwrap()));
        }
        let coordinates: Vec<Vertex> = region
            .vertices
            .iter()
            .map(|&(_, x, y)| Vertex::new(x, y))
            .collect();

        if coordinates.len() < 3 {
            out.issues.push(RegionIssue::TooFewVertices {
                region_id,
                count: coordinates.len(),
            });
            continue;
        }
        if let Some(index) = coordinates
            .iter()
            .position(|v| !v.x.is_finite() || !v.y.is_finite() || v.x < 0.0 || v.y < 0.0)
        {
            out.issues
                .push(RegionIssue::InvalidCoordinate { region_id, index });
            continue;
        }
        if !schema.accepts(&label) {
            out.issues.push(RegionIssue::UnknownLabel {
                region_id,
                label: label.clone(),
            });
        }
        out.regions
            .push(RegionRecord::new(region_id, label, coordinates, region.attrs));
    }
    Ok(out)
}

/// Serializes regions in the layout `parse_annotations` reads with the same
/// schema. Vertex `Order` attributes are written as 0..n.
pub fn write_annotations(regions: &[RegionRecord], schema: &SchemaMapping) -> String {
    let mut out = String::from("<?xml version=\"1.0\"?>\n<ASAP_Annotations>\n\t<Annotations>\n");
    for region in regions {
        let _ = write!(
            out,
            "\t\t<{} {}=\"{}\" {}=\"{}\"",
            schema.annotation_tag,
            schema.id_attr,
            region.region_id,
            schema.label_attr,
            escape(region.label.as_str())
        );
        for (k, v) in &region.metadata {
            let _ = write!(out, " {}=\"{}\"", k, escape(v.as_str()));
        }
        out.push_str(">\n\t\t\t<Coordinates>\n");
        for (i, v) in region.coordinates.iter().enumerate() {
            let _ = writeln!(
                out,
                "\t\t\t\t<{} {}=\"{}\" {}=\"{}\" {}=\"{}\" />",
                schema.coordinate_tag,
                schema.order_attr,
                i,
                schema.x_attr,
                v.x / schema.coordinate_scale,
                schema.y_attr,
                v.y / schema.coordinate_scale
            );
        }
        let _ = writeln!(out, "\t\t\t</Coordinates>\n\t\t</{}>", schema.annotation_tag);
    }
    out.push_str("\t</Annotations>\n</ASAP_Annotations>\n");
    out
}
