//! In-memory event log model.
//!
//! An [`EventLog`] is a sequence of [`Trace`]s, one per case, each holding the
//! time-ordered [`Event`]s of that case. The three standard event attributes
//! (`concept:name`, `time:timestamp`, `org:resource`) live in dedicated fields
//! but stay addressable through their XES keys via [`Event::get`] and
//! [`Event::set`]. Keys prefixed with `case:` address trace-level attributes,
//! `case:concept:name` being the case id.

use std::borrow::Cow;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use chrono::{DateTime, Datelike, SubsecRound, TimeZone, Timelike, Utc};
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metadata::PrivacyMetadata;

pub const ACTIVITY_KEY: &str = "concept:name";
pub const TIMESTAMP_KEY: &str = "time:timestamp";
pub const RESOURCE_KEY: &str = "org:resource";
pub const CASE_PREFIX: &str = "case:";

pub type Timestamp = DateTime<Utc>;

/// Ordered attribute map. Equality ignores insertion order.
pub type Attributes = IndexMap<String, TypedValue>;

/// Truncates an instant to millisecond precision.
pub fn to_millis(ts: Timestamp) -> Timestamp {
    ts.trunc_subsecs(3)
}

/// Renders a timestamp in the canonical `YYYY-MM-DDTHH:MM:SS.mmmZ` form.
pub fn format_timestamp(ts: &Timestamp) -> String {
    ts.to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// Parses an ISO-8601 instant. A missing offset is read as UTC.
pub fn parse_timestamp(raw: &str) -> Option<Timestamp> {
    let raw = raw.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(raw) {
        return Some(to_millis(dt.with_timezone(&Utc)));
    }
    // XES writers in the wild emit offsets without a colon and may omit the zone
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f%z", "%Y-%m-%dT%H:%M:%S%z"] {
        if let Ok(dt) = DateTime::parse_from_str(raw, fmt) {
            return Some(to_millis(dt.with_timezone(&Utc)));
        }
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S%.f"] {
        if let Ok(naive) = chrono::NaiveDateTime::parse_from_str(raw, fmt) {
            return Some(to_millis(Utc.from_utc_datetime(&naive)));
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueKind {
    String,
    Integer,
    Real,
    Boolean,
    Datetime,
    Id,
    List,
    Container,
}

impl ValueKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ValueKind::String => "string",
            ValueKind::Integer => "integer",
            ValueKind::Real => "real",
            ValueKind::Boolean => "boolean",
            ValueKind::Datetime => "datetime",
            ValueKind::Id => "id",
            ValueKind::List => "list",
            ValueKind::Container => "container",
        }
    }

    pub fn parse(raw: &str) -> Option<ValueKind> {
        Some(match raw {
            "string" => ValueKind::String,
            "integer" => ValueKind::Integer,
            "real" => ValueKind::Real,
            "boolean" => ValueKind::Boolean,
            "datetime" => ValueKind::Datetime,
            "id" => ValueKind::Id,
            "list" => ValueKind::List,
            "container" => ValueKind::Container,
            _ => return None,
        })
    }

    pub fn is_numeric(self) -> bool {
        matches!(self, ValueKind::Integer | ValueKind::Real)
    }
}

impl fmt::Display for ValueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// An attribute value. The variant is the kind, so kind and payload cannot disagree.
#[derive(Debug, Clone, PartialEq)]
pub enum TypedValue {
    String(String),
    Integer(i64),
    Real(f64),
    Boolean(bool),
    Datetime(Timestamp),
    Id(String),
    List(Vec<(String, TypedValue)>),
    Container(Vec<(String, TypedValue)>),
}

impl TypedValue {
    pub fn kind(&self) -> ValueKind {
        match self {
            TypedValue::String(_) => ValueKind::String,
            TypedValue::Integer(_) => ValueKind::Integer,
            TypedValue::Real(_) => ValueKind::Real,
            TypedValue::Boolean(_) => ValueKind::Boolean,
            TypedValue::Datetime(_) => ValueKind::Datetime,
            TypedValue::Id(_) => ValueKind::Id,
            TypedValue::List(_) => ValueKind::List,
            TypedValue::Container(_) => ValueKind::Container,
        }
    }

    pub fn string(s: impl Into<String>) -> Self {
        TypedValue::String(s.into())
    }

    pub fn datetime(ts: Timestamp) -> Self {
        TypedValue::Datetime(to_millis(ts))
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            TypedValue::String(s) | TypedValue::Id(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            TypedValue::Integer(i) => Some(*i as f64),
            TypedValue::Real(r) => Some(*r),
            _ => None,
        }
    }

    pub fn as_datetime(&self) -> Option<Timestamp> {
        match self {
            TypedValue::Datetime(ts) => Some(*ts),
            _ => None,
        }
    }

    /// Compares two values of compatible kinds. Integers and reals compare numerically.
    pub fn partial_cmp_typed(&self, other: &TypedValue) -> Option<std::cmp::Ordering> {
        use TypedValue::*;
        match (self, other) {
            (String(a) | Id(a), String(b) | Id(b)) => Some(a.cmp(b)),
            (Boolean(a), Boolean(b)) => Some(a.cmp(b)),
            (Datetime(a), Datetime(b)) => Some(a.cmp(b)),
            (a, b) if a.kind().is_numeric() && b.kind().is_numeric() => {
                a.as_f64()?.partial_cmp(&b.as_f64()?)
            }
            _ => None,
        }
    }

    /// Text form used for display, hashing and scalar serialization.
    pub fn render(&self) -> Cow<'_, str> {
        match self {
            TypedValue::String(s) | TypedValue::Id(s) => Cow::Borrowed(s),
            TypedValue::Integer(i) => Cow::Owned(i.to_string()),
            TypedValue::Real(r) => Cow::Owned(format_real(*r)),
            TypedValue::Boolean(b) => Cow::Borrowed(if *b { "true" } else { "false" }),
            TypedValue::Datetime(ts) => Cow::Owned(format_timestamp(ts)),
            TypedValue::List(items) | TypedValue::Container(items) => Cow::Owned(format!(
                "[{}]",
                items
                    .iter()
                    .map(|(k, v)| format!("{k}={}", v.render()))
                    .collect::<Vec<_>>()
                    .join(",")
            )),
        }
    }
}

/// Shortest representation of a real that parses back to the same bits.
pub fn format_real(r: f64) -> String {
    if r.is_finite() && r == r.trunc() && r.abs() < 1e15 {
        format!("{r:.1}")
    } else {
        format!("{r}")
    }
}

impl fmt::Display for TypedValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub activity: String,
    pub timestamp: Timestamp,
    pub resource: Option<String>,
    /// Every attribute other than the three standard ones.
    pub payload: Attributes,
}

impl Event {
    pub fn new(activity: impl Into<String>, timestamp: Timestamp) -> Self {
        Event {
            activity: activity.into(),
            timestamp: to_millis(timestamp),
            resource: None,
            payload: Attributes::new(),
        }
    }

    pub fn with_resource(mut self, resource: impl Into<String>) -> Self {
        self.resource = Some(resource.into());
        self
    }

    pub fn with_attribute(mut self, key: impl Into<String>, value: TypedValue) -> Self {
        self.payload.insert(key.into(), value);
        self
    }

    pub fn get(&self, key: &str) -> Option<Cow<'_, TypedValue>> {
        match key {
            ACTIVITY_KEY => Some(Cow::Owned(TypedValue::String(self.activity.clone()))),
            TIMESTAMP_KEY => Some(Cow::Owned(TypedValue::Datetime(self.timestamp))),
            RESOURCE_KEY => self
                .resource
                .as_ref()
                .map(|r| Cow::Owned(TypedValue::String(r.clone()))),
            _ => self.payload.get(key).map(Cow::Borrowed),
        }
    }

    /// Sets an attribute, routing standard keys to their dedicated fields.
    pub fn set(&mut self, key: &str, value: TypedValue) -> Result<()> {
        match key {
            ACTIVITY_KEY => {
                let activity = value
                    .as_str()
                    .ok_or_else(|| Error::type_mismatch(key, "activity must be a string"))?;
                if activity.is_empty() {
                    return Err(Error::type_mismatch(key, "activity must be non-empty"));
                }
                self.activity = activity.to_owned();
            }
            TIMESTAMP_KEY => {
                self.timestamp = value
                    .as_datetime()
                    .ok_or_else(|| Error::type_mismatch(key, "timestamp must be a datetime"))?;
            }
            RESOURCE_KEY => {
                let resource = value
                    .as_str()
                    .ok_or_else(|| Error::type_mismatch(key, "resource must be a string"))?;
                self.resource = Some(resource.to_owned());
            }
            _ => {
                self.payload.insert(key.to_owned(), value);
            }
        }
        Ok(())
    }

    pub fn remove(&mut self, key: &str) -> Result<Option<TypedValue>> {
        match key {
            ACTIVITY_KEY | TIMESTAMP_KEY => Err(Error::InvalidOperation(format!(
                "`{key}` is mandatory on events and cannot be removed"
            ))),
            RESOURCE_KEY => Ok(self.resource.take().map(TypedValue::String)),
            _ => Ok(self.payload.shift_remove(key)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub case_id: String,
    /// Trace attributes other than `concept:name`.
    pub attributes: Attributes,
    pub events: Vec<Event>,
}

impl Trace {
    pub fn new(case_id: impl Into<String>, events: Vec<Event>) -> Self {
        let mut trace = Trace {
            case_id: case_id.into(),
            attributes: Attributes::new(),
            events,
        };
        trace.sort_events();
        trace
    }

    pub fn with_attribute(mut self, key: impl Into<String>, value: TypedValue) -> Self {
        self.attributes.insert(key.into(), value);
        self
    }

    /// Restores non-decreasing timestamp order; equal timestamps keep their order.
    pub fn sort_events(&mut self) {
        self.events.sort_by_key(|e| e.timestamp);
    }

    pub fn activities(&self) -> Vec<String> {
        self.events.iter().map(|e| e.activity.clone()).collect()
    }

    pub fn get(&self, key: &str) -> Option<Cow<'_, TypedValue>> {
        match key {
            ACTIVITY_KEY => Some(Cow::Owned(TypedValue::String(self.case_id.clone()))),
            _ => self.attributes.get(key).map(Cow::Borrowed),
        }
    }

    pub fn set(&mut self, key: &str, value: TypedValue) -> Result<()> {
        match key {
            ACTIVITY_KEY => {
                self.case_id = value
                    .as_str()
                    .ok_or_else(|| Error::type_mismatch("case:concept:name", "case id must be a string"))?
                    .to_owned();
            }
            _ => {
                self.attributes.insert(key.to_owned(), value);
            }
        }
        Ok(())
    }

    pub fn remove(&mut self, key: &str) -> Result<Option<TypedValue>> {
        match key {
            ACTIVITY_KEY => Err(Error::InvalidOperation(
                "the case id cannot be removed".to_owned(),
            )),
            _ => Ok(self.attributes.shift_remove(key)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Extension {
    pub name: String,
    pub prefix: String,
    pub uri: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EventLog {
    pub attributes: Attributes,
    /// Keyed by prefix.
    pub extensions: BTreeMap<String, Extension>,
    /// Classifier name to its space-separated key list.
    pub classifiers: BTreeMap<String, String>,
    /// Scope (`trace` or `event`) to default attribute values.
    pub globals: BTreeMap<String, Attributes>,
    pub traces: Vec<Trace>,
    pub privacy_metadata: PrivacyMetadata,
}

/// Where an attribute key lives in the log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AttrRef {
    Event(String),
    Trace(String),
}

impl AttrRef {
    pub fn key(&self) -> &str {
        match self {
            AttrRef::Event(k) | AttrRef::Trace(k) => k,
        }
    }

    /// The key as written by users (`case:` prefix for trace attributes).
    pub fn qualified(&self) -> String {
        match self {
            AttrRef::Event(k) => k.clone(),
            AttrRef::Trace(k) => format!("{CASE_PREFIX}{k}"),
        }
    }
}

impl EventLog {
    pub fn new(traces: Vec<Trace>) -> Self {
        EventLog {
            traces,
            ..EventLog::default()
        }
    }

    pub fn event_count(&self) -> usize {
        self.traces.iter().map(|t| t.events.len()).sum()
    }

    pub fn alphabet(&self) -> BTreeSet<String> {
        self.traces
            .iter()
            .flat_map(|t| t.events.iter().map(|e| e.activity.clone()))
            .collect()
    }

    pub fn events(&self) -> impl Iterator<Item = &Event> {
        self.traces.iter().flat_map(|t| t.events.iter())
    }

    /// Resolves a user-facing attribute key to its level.
    ///
    /// `case:`-prefixed keys address trace attributes. Other keys resolve to
    /// event level when any event (or an event global) carries them, then to
    /// trace level.
    pub fn resolve(&self, key: &str) -> Result<AttrRef> {
        if let Some(rest) = key.strip_prefix(CASE_PREFIX) {
            if rest == ACTIVITY_KEY || self.has_trace_attribute(rest) {
                return Ok(AttrRef::Trace(rest.to_owned()));
            }
            return Err(Error::UnknownAttribute(key.to_owned()));
        }
        if key == ACTIVITY_KEY || key == TIMESTAMP_KEY || self.has_event_attribute(key) {
            return Ok(AttrRef::Event(key.to_owned()));
        }
        if self.has_trace_attribute(key) {
            return Ok(AttrRef::Trace(key.to_owned()));
        }
        Err(Error::UnknownAttribute(key.to_owned()))
    }

    fn has_event_attribute(&self, key: &str) -> bool {
        let declared = self
            .globals
            .get("event")
            .is_some_and(|g| g.contains_key(key));
        declared
            || self.events().any(|e| match key {
                RESOURCE_KEY => e.resource.is_some(),
                _ => e.payload.contains_key(key),
            })
    }

    fn has_trace_attribute(&self, key: &str) -> bool {
        let declared = self
            .globals
            .get("trace")
            .is_some_and(|g| g.contains_key(key));
        declared || self.traces.iter().any(|t| t.attributes.contains_key(key))
    }

    /// Drops a key from the global declarations of the given scope.
    pub(crate) fn undeclare(&mut self, scope: &str, key: &str) {
        if let Some(globals) = self.globals.get_mut(scope) {
            globals.shift_remove(key);
            if globals.is_empty() {
                self.globals.remove(scope);
            }
        }
    }

    /// Checks the structural invariants of the model.
    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for trace in &self.traces {
            if !seen.insert(trace.case_id.as_str()) {
                return Err(Error::InvalidOperation(format!(
                    "duplicate case id `{}`",
                    trace.case_id
                )));
            }
            for pair in trace.events.windows(2) {
                if pair[1].timestamp < pair[0].timestamp {
                    return Err(Error::InvalidOperation(format!(
                        "events of case `{}` are not time-ordered",
                        trace.case_id
                    )));
                }
            }
            if trace.events.iter().any(|e| e.activity.is_empty()) {
                return Err(Error::InvalidOperation(format!(
                    "empty activity in case `{}`",
                    trace.case_id
                )));
            }
        }
        if let Some(globals) = self.globals.get("event") {
            for key in globals.keys() {
                if let Some(event) = self.events().find(|e| e.get(key).is_none()) {
                    return Err(Error::InvalidOperation(format!(
                        "global event attribute `{key}` missing on an event of activity `{}`",
                        event.activity
                    )));
                }
            }
        }
        self.privacy_metadata.validate()
    }
}

/// Calendar granularity for timestamp generalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Year,
    Month,
    Day,
    Hour,
    Minute,
}

impl Granularity {
    pub fn parse(raw: &str) -> Option<Granularity> {
        Some(match raw {
            "year" => Granularity::Year,
            "month" => Granularity::Month,
            "day" => Granularity::Day,
            "hour" => Granularity::Hour,
            "minute" => Granularity::Minute,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Granularity::Year => "year",
            Granularity::Month => "month",
            Granularity::Day => "day",
            Granularity::Hour => "hour",
            Granularity::Minute => "minute",
        }
    }

    /// Truncates towards the start of the enclosing calendar unit (UTC). Monotone.
    pub fn truncate(self, ts: Timestamp) -> Timestamp {
        let (month, day, hour, minute) = match self {
            Granularity::Year => (1, 1, 0, 0),
            Granularity::Month => (ts.month(), 1, 0, 0),
            Granularity::Day => (ts.month(), ts.day(), 0, 0),
            Granularity::Hour => (ts.month(), ts.day(), ts.hour(), 0),
            Granularity::Minute => (ts.month(), ts.day(), ts.hour(), ts.minute()),
        };
        Utc.with_ymd_and_hms(ts.year(), month, day, hour, minute, 0)
            .single()
            .expect("truncated instant is a valid UTC time")
    }
}
