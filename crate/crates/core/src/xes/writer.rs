use std::fmt::Write as _;

use quick_xml::escape::escape;

use crate::metadata::PrivacyMetadata;
use crate::model::{
    format_real, format_timestamp, Attributes, Event, EventLog, Trace, TypedValue, ACTIVITY_KEY,
    RESOURCE_KEY, TIMESTAMP_KEY,
};

use super::METADATA_KEY;

struct Writer {
    out: String,
}

impl Writer {
    fn indent(&mut self, depth: usize) {
        for _ in 0..depth {
            self.out.push_str("  ");
        }
    }

    fn attribute(&mut self, depth: usize, key: &str, value: &TypedValue) {
        self.indent(depth);
        let key = escape(key);
        let (tag, scalar) = match value {
            TypedValue::String(s) => ("string", Some(escape(s.as_str()).into_owned())),
            TypedValue::Id(s) => ("id", Some(escape(s.as_str()).into_owned())),
            TypedValue::Integer(i) => ("int", Some(i.to_string())),
            TypedValue::Real(r) => (
                "float",
                Some(match *r {
                    f if f == f64::INFINITY => "INF".to_owned(),
                    f if f == f64::NEG_INFINITY => "-INF".to_owned(),
                    f => format_real(f),
                }),
            ),
            TypedValue::Boolean(b) => ("boolean", Some(b.to_string())),
            TypedValue::Datetime(ts) => ("date", Some(format_timestamp(ts))),
            TypedValue::List(_) => ("list", None),
            TypedValue::Container(_) => ("container", None),
        };
        match (scalar, value) {
            (Some(v), _) => {
                let _ = writeln!(self.out, "<{tag} key=\"{key}\" value=\"{v}\"/>");
            }
            (None, TypedValue::List(items) | TypedValue::Container(items)) => {
                if items.is_empty() {
                    let _ = writeln!(self.out, "<{tag} key=\"{key}\"/>");
                } else {
                    let _ = writeln!(self.out, "<{tag} key=\"{key}\">");
                    for (k, v) in items {
                        self.attribute(depth + 1, k, v);
                    }
                    self.indent(depth);
                    let _ = writeln!(self.out, "</{tag}>");
                }
            }
            (None, _) => unreachable!("scalar kinds always render a value"),
        }
    }

    /// Attributes in key order, skipping the keys listed in `skip`.
    fn attributes(&mut self, depth: usize, attrs: &Attributes, skip: &[&str]) {
        let mut keys: Vec<&String> = attrs.keys().filter(|k| !skip.contains(&k.as_str())).collect();
        keys.sort();
        for key in keys {
            self.attribute(depth, key, &attrs[key]);
        }
    }

    fn metadata(&mut self, depth: usize, metadata: &PrivacyMetadata) {
        if metadata.is_empty() {
            return;
        }
        let records = metadata
            .records
            .iter()
            .map(|r| {
                let targets = r
                    .target_attributes
                    .iter()
                    .map(|t| ("attribute".to_owned(), TypedValue::String(t.clone())))
                    .collect();
                let fields = vec![
                    ("operation_kind".to_owned(), TypedValue::string(r.operation_kind.as_str())),
                    ("level".to_owned(), TypedValue::string(r.level.as_str())),
                    ("applied_at".to_owned(), TypedValue::String(format_timestamp(&r.applied_at))),
                    ("parameter_digest".to_owned(), TypedValue::String(r.parameter_digest.clone())),
                    ("target_attributes".to_owned(), TypedValue::List(targets)),
                ];
                (r.seq.to_string(), TypedValue::Container(fields))
            })
            .collect();
        self.attribute(depth, METADATA_KEY, &TypedValue::Container(records));
    }

    fn event(&mut self, depth: usize, event: &Event) {
        self.indent(depth);
        self.out.push_str("<event>\n");
        self.attribute(depth + 1, ACTIVITY_KEY, &TypedValue::String(event.activity.clone()));
        if let Some(resource) = &event.resource {
            self.attribute(depth + 1, RESOURCE_KEY, &TypedValue::String(resource.clone()));
        }
        self.attribute(depth + 1, TIMESTAMP_KEY, &TypedValue::Datetime(event.timestamp));
        self.attributes(depth + 1, &event.payload, &[ACTIVITY_KEY, RESOURCE_KEY, TIMESTAMP_KEY]);
        self.indent(depth);
        self.out.push_str("</event>\n");
    }

    fn trace(&mut self, depth: usize, trace: &Trace) {
        self.indent(depth);
        self.out.push_str("<trace>\n");
        self.attribute(depth + 1, ACTIVITY_KEY, &TypedValue::String(trace.case_id.clone()));
        self.attributes(depth + 1, &trace.attributes, &[ACTIVITY_KEY]);
        for event in &trace.events {
            self.event(depth + 1, event);
        }
        self.indent(depth);
        self.out.push_str("</trace>\n");
    }
}

/// Serializes a log to canonical XES: declarations and attributes in key
/// order, standard event attributes first, privacy metadata after the log
/// attributes.
pub fn write_xes(log: &EventLog) -> Vec<u8> {
    let mut w = Writer {
        out: String::with_capacity(256 + log.event_count() * 200),
    };
    w.out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    w.out
        .push_str("<log xes.version=\"1849-2016\" xes.features=\"nested-attributes\">\n");
    for ext in log.extensions.values() {
        w.indent(1);
        let _ = writeln!(
            w.out,
            "<extension name=\"{}\" prefix=\"{}\" uri=\"{}\"/>",
            escape(ext.name.as_str()),
            escape(ext.prefix.as_str()),
            escape(ext.uri.as_str())
        );
    }
    for (scope, attrs) in &log.globals {
        w.indent(1);
        let _ = writeln!(w.out, "<global scope=\"{}\">", escape(scope.as_str()));
        w.attributes(2, attrs, &[]);
        w.indent(1);
        w.out.push_str("</global>\n");
    }
    for (name, keys) in &log.classifiers {
        w.indent(1);
        let _ = writeln!(
            w.out,
            "<classifier name=\"{}\" keys=\"{}\"/>",
            escape(name.as_str()),
            escape(keys.as_str())
        );
    }
    w.attributes(1, &log.attributes, &[METADATA_KEY]);
    w.metadata(1, &log.privacy_metadata);
    for trace in &log.traces {
        w.trace(1, trace);
    }
    w.out.push_str("</log>\n");
    w.out.into_bytes()
}
