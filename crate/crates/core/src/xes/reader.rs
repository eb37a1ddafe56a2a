use std::collections::BTreeSet;

use quick_xml::events::{BytesStart, Event as XmlEvent};
use quick_xml::Reader;

use crate::error::{Error, Result};
use crate::metadata::{Level, OperationKind, OperationRecord, PrivacyMetadata};
use crate::model::{
    parse_timestamp, Attributes, Event, EventLog, Extension, Trace, TypedValue, ACTIVITY_KEY,
    RESOURCE_KEY, TIMESTAMP_KEY,
};

use super::METADATA_KEY;

/// Minimal element tree; XES documents are read whole before interpretation.
#[derive(Debug)]
struct Node {
    name: String,
    attrs: Vec<(String, String)>,
    children: Vec<Node>,
    offset: usize,
}

impl Node {
    fn attr(&self, name: &str) -> Option<&str> {
        self.attrs
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| v.as_str())
    }
}

struct Position<'a> {
    raw: &'a [u8],
}

impl Position<'_> {
    fn line_col(&self, offset: usize) -> (usize, usize) {
        let upto = &self.raw[..offset.min(self.raw.len())];
        let line = upto.iter().filter(|&&b| b == b'\n').count() + 1;
        let column = upto.iter().rev().take_while(|&&b| b != b'\n').count() + 1;
        (line, column)
    }

    fn malformed(&self, offset: usize, message: impl Into<String>) -> Error {
        let (line, column) = self.line_col(offset);
        Error::MalformedXml {
            line,
            column,
            message: message.into(),
        }
    }

    fn schema(&self, node: &Node, message: impl Into<String>) -> Error {
        let (line, column) = self.line_col(node.offset);
        Error::SchemaViolation {
            line,
            column,
            message: message.into(),
        }
    }
}

fn element(start: &BytesStart<'_>, offset: usize, pos: &Position<'_>) -> Result<Node> {
    let name = String::from_utf8_lossy(start.local_name().as_ref()).into_owned();
    let mut attrs = Vec::new();
    for attr in start.attributes() {
        let attr = attr.map_err(|e| pos.malformed(offset, e.to_string()))?;
        let key = String::from_utf8_lossy(attr.key.local_name().as_ref()).into_owned();
        let value = attr
            .unescape_value()
            .map_err(|e| pos.malformed(offset, e.to_string()))?
            .into_owned();
        attrs.push((key, value));
    }
    Ok(Node {
        name,
        attrs,
        children: Vec::new(),
        offset,
    })
}

fn read_tree(raw: &[u8], pos: &Position<'_>) -> Result<Node> {
    let text = std::str::from_utf8(raw).map_err(|e| pos.malformed(e.valid_up_to(), "invalid UTF-8"))?;
    let mut reader = Reader::from_str(text);
    reader.config_mut().check_end_names = true;

    let mut stack: Vec<Node> = Vec::new();
    let mut root: Option<Node> = None;
    loop {
        let offset = reader.buffer_position() as usize;
        let event = reader
            .read_event()
            .map_err(|e| pos.malformed(reader.error_position() as usize, e.to_string()))?;
        match event {
            XmlEvent::Start(start) => stack.push(element(&start, offset, pos)?),
            XmlEvent::Empty(start) => {
                let node = element(&start, offset, pos)?;
                match stack.last_mut() {
                    Some(parent) => parent.children.push(node),
                    None if root.is_none() => root = Some(node),
                    None => return Err(pos.malformed(offset, "multiple root elements")),
                }
            }
            XmlEvent::End(_) => {
                let node = stack
                    .pop()
                    .ok_or_else(|| pos.malformed(offset, "unbalanced end tag"))?;
                match stack.last_mut() {
                    Some(parent) => parent.children.push(node),
                    None if root.is_none() => root = Some(node),
                    None => return Err(pos.malformed(offset, "multiple root elements")),
                }
            }
            XmlEvent::Text(t) => {
                let content = t.unescape().map_err(|e| pos.malformed(offset, e.to_string()))?;
                if !content.trim().is_empty() && stack.is_empty() {
                    return Err(pos.malformed(offset, "text outside the root element"));
                }
            }
            XmlEvent::Eof => break,
            _ => {}
        }
    }
    if let Some(open) = stack.last() {
        return Err(pos.malformed(raw.len(), format!("unclosed element <{}>", open.name)));
    }
    root.ok_or_else(|| pos.malformed(0, "document has no root element"))
}

fn is_attribute_element(name: &str) -> bool {
    matches!(
        name,
        "string" | "date" | "int" | "float" | "boolean" | "id" | "list" | "container"
    )
}

fn parse_attribute(node: &Node, pos: &Position<'_>) -> Result<(String, TypedValue)> {
    let key = node
        .attr("key")
        .ok_or_else(|| pos.schema(node, format!("<{}> without key", node.name)))?
        .to_owned();
    let scalar = || {
        node.attr("value")
            .ok_or_else(|| pos.schema(node, format!("attribute `{key}` without value")))
    };
    let value = match node.name.as_str() {
        "string" => TypedValue::String(scalar()?.to_owned()),
        "id" => TypedValue::Id(scalar()?.to_owned()),
        "int" => TypedValue::Integer(
            scalar()?
                .trim()
                .parse()
                .map_err(|_| pos.schema(node, format!("`{key}` is not an integer")))?,
        ),
        "float" => {
            let raw = scalar()?.trim();
            let parsed = match raw {
                "INF" => Some(f64::INFINITY),
                "-INF" => Some(f64::NEG_INFINITY),
                _ => raw.parse().ok(),
            };
            TypedValue::Real(parsed.ok_or_else(|| pos.schema(node, format!("`{key}` is not a float")))?)
        }
        "boolean" => TypedValue::Boolean(match scalar()?.trim() {
            "true" | "1" => true,
            "false" | "0" => false,
            other => return Err(pos.schema(node, format!("`{key}` has non-boolean value `{other}`"))),
        }),
        "date" => TypedValue::Datetime(
            parse_timestamp(scalar()?)
                .ok_or_else(|| pos.schema(node, format!("unparseable timestamp on `{key}`")))?,
        ),
        "list" | "container" => {
            let mut items = Vec::new();
            for child in &node.children {
                // older writers wrap list items in <values>
                if child.name == "values" {
                    for item in &child.children {
                        items.push(parse_attribute(item, pos)?);
                    }
                } else if is_attribute_element(&child.name) {
                    items.push(parse_attribute(child, pos)?);
                } else {
                    return Err(pos.schema(child, format!("unexpected <{}> inside `{key}`", child.name)));
                }
            }
            if node.name == "list" {
                TypedValue::List(items)
            } else {
                TypedValue::Container(items)
            }
        }
        other => return Err(pos.schema(node, format!("unknown attribute element <{other}>"))),
    };
    Ok((key, value))
}

fn parse_attributes<'n>(
    nodes: impl Iterator<Item = &'n Node>,
    pos: &Position<'_>,
) -> Result<Attributes> {
    let mut out = Attributes::new();
    for node in nodes {
        let (key, value) = parse_attribute(node, pos)?;
        out.insert(key, value);
    }
    Ok(out)
}

fn parse_metadata(node: &Node, pos: &Position<'_>) -> Result<PrivacyMetadata> {
    let mut metadata = PrivacyMetadata::default();
    for child in &node.children {
        if child.name != "container" {
            return Err(pos.schema(child, "privacy metadata holds one container per record"));
        }
        let seq: u32 = child
            .attr("key")
            .and_then(|k| k.parse().ok())
            .ok_or_else(|| pos.schema(child, "privacy metadata record key must be its sequence number"))?;
        let fields = parse_attributes(child.children.iter(), pos)?;
        let text = |name: &str| -> Result<String> {
            fields
                .get(name)
                .and_then(TypedValue::as_str)
                .map(str::to_owned)
                .ok_or_else(|| pos.schema(child, format!("privacy metadata record {seq} lacks `{name}`")))
        };
        let kind = text("operation_kind")?;
        let level = text("level")?;
        let applied_at = text("applied_at")?;
        let targets = match fields.get("target_attributes") {
            Some(TypedValue::List(items)) => items
                .iter()
                .map(|(_, v)| {
                    v.as_str()
                        .map(str::to_owned)
                        .ok_or_else(|| pos.schema(child, "target attribute names must be strings"))
                })
                .collect::<Result<BTreeSet<_>>>()?,
            None => BTreeSet::new(),
            Some(_) => return Err(pos.schema(child, "target_attributes must be a list")),
        };
        metadata.records.push(OperationRecord {
            seq,
            operation_kind: OperationKind::parse(&kind)
                .ok_or_else(|| pos.schema(child, format!("unknown operation kind `{kind}`")))?,
            level: Level::parse(&level)
                .ok_or_else(|| pos.schema(child, format!("unknown level `{level}`")))?,
            target_attributes: targets,
            parameter_digest: text("parameter_digest")?,
            applied_at: parse_timestamp(&applied_at)
                .ok_or_else(|| pos.schema(child, "unparseable applied_at"))?,
        });
    }
    metadata
        .validate()
        .map_err(|e| pos.schema(node, e.to_string()))?;
    Ok(metadata)
}

fn apply_defaults(target: &mut Attributes, defaults: Option<&Attributes>) {
    if let Some(defaults) = defaults {
        for (key, value) in defaults {
            if !target.contains_key(key) {
                target.insert(key.clone(), value.clone());
            }
        }
    }
}

fn parse_event(node: &Node, defaults: Option<&Attributes>, pos: &Position<'_>) -> Result<Event> {
    let mut attrs = parse_attributes(
        node.children.iter().filter(|c| is_attribute_element(&c.name)),
        pos,
    )?;
    if let Some(other) = node.children.iter().find(|c| !is_attribute_element(&c.name)) {
        return Err(pos.schema(other, format!("unexpected <{}> inside <event>", other.name)));
    }
    apply_defaults(&mut attrs, defaults);

    let activity = match attrs.shift_remove(ACTIVITY_KEY) {
        Some(v) => v.render().into_owned(),
        None => return Err(pos.schema(node, "event without concept:name")),
    };
    if activity.is_empty() {
        return Err(pos.schema(node, "event with empty concept:name"));
    }
    let timestamp = match attrs.shift_remove(TIMESTAMP_KEY) {
        Some(TypedValue::Datetime(ts)) => ts,
        Some(_) => return Err(pos.schema(node, "time:timestamp must be a date")),
        None => return Err(pos.schema(node, "event without time:timestamp")),
    };
    let resource = attrs
        .shift_remove(RESOURCE_KEY)
        .map(|v| v.render().into_owned());
    Ok(Event {
        activity,
        timestamp,
        resource,
        payload: attrs,
    })
}

fn parse_trace(node: &Node, log: &EventLog, pos: &Position<'_>) -> Result<Trace> {
    let mut attrs = Attributes::new();
    let mut events = Vec::new();
    for child in &node.children {
        if child.name == "event" {
            events.push(parse_event(child, log.globals.get("event"), pos)?);
        } else if is_attribute_element(&child.name) {
            let (key, value) = parse_attribute(child, pos)?;
            attrs.insert(key, value);
        } else {
            return Err(pos.schema(child, format!("unexpected <{}> inside <trace>", child.name)));
        }
    }
    apply_defaults(&mut attrs, log.globals.get("trace"));
    let case_id = attrs
        .shift_remove(ACTIVITY_KEY)
        .map(|v| v.render().into_owned())
        .ok_or_else(|| pos.schema(node, "trace without concept:name case id"))?;
    let mut trace = Trace {
        case_id,
        attributes: attrs,
        events,
    };
    trace.sort_events();
    Ok(trace)
}

/// Parses an XES document.
pub fn parse_xes(raw: &[u8]) -> Result<EventLog> {
    let pos = Position { raw };
    let root = read_tree(raw, &pos)?;
    if root.name != "log" {
        return Err(pos.schema(&root, format!("root element is <{}>, expected <log>", root.name)));
    }

    let mut log = EventLog::default();
    let mut seen_cases = BTreeSet::new();
    for child in &root.children {
        match child.name.as_str() {
            "extension" => {
                let get = |k: &str| {
                    child
                        .attr(k)
                        .map(str::to_owned)
                        .ok_or_else(|| pos.schema(child, format!("extension without {k}")))
                };
                let ext = Extension {
                    name: get("name")?,
                    prefix: get("prefix")?,
                    uri: get("uri")?,
                };
                log.extensions.insert(ext.prefix.clone(), ext);
            }
            "global" => {
                let scope = child.attr("scope").unwrap_or("event").to_owned();
                if scope != "event" && scope != "trace" {
                    return Err(pos.schema(child, format!("unknown global scope `{scope}`")));
                }
                let attrs = parse_attributes(child.children.iter(), &pos)?;
                log.globals.entry(scope).or_default().extend(attrs);
            }
            "classifier" => {
                let name = child
                    .attr("name")
                    .ok_or_else(|| pos.schema(child, "classifier without name"))?;
                let keys = child
                    .attr("keys")
                    .ok_or_else(|| pos.schema(child, "classifier without keys"))?;
                log.classifiers.insert(name.to_owned(), keys.to_owned());
            }
            "container" if child.attr("key") == Some(METADATA_KEY) => {
                log.privacy_metadata = parse_metadata(child, &pos)?;
            }
            "trace" => {
                let trace = parse_trace(child, &log, &pos)?;
                if !seen_cases.insert(trace.case_id.clone()) {
                    return Err(pos.schema(child, format!("duplicate case id `{}`", trace.case_id)));
                }
                log.traces.push(trace);
            }
            name if is_attribute_element(name) => {
                let (key, value) = parse_attribute(child, &pos)?;
                log.attributes.insert(key, value);
            }
            other => return Err(pos.schema(child, format!("unexpected <{other}> inside <log>"))),
        }
    }
    Ok(log)
}
