//! Event log abstractions: non-XES tabular artifacts derived from a log.
//!
//! On disk an abstraction is a single JSON document (`.ela`) with a `header`
//! object, a typed `columns` list and a `rows` table:
//!
//! ```json
//! {
//!   "header": {
//!     "abstraction_kind": "connector-dfg",
//!     "origin_log_id": "3f1c9a…",
//!     "technique": "connector-dfg",
//!     "privacy_metadata": [ … ]
//!   },
//!   "columns": [{ "name": "count", "kind": "integer" }],
//!   "rows": [[2]]
//! }
//! ```

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::metadata::PrivacyMetadata;
use crate::model::{format_timestamp, parse_timestamp, TypedValue, ValueKind};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbstractionHeader {
    pub abstraction_kind: String,
    pub origin_log_id: String,
    pub technique: String,
    pub privacy_metadata: PrivacyMetadata,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Column {
    pub name: String,
    pub kind: ValueKind,
}

impl Column {
    pub fn new(name: impl Into<String>, kind: ValueKind) -> Self {
        Column {
            name: name.into(),
            kind,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventLogAbstraction {
    pub header: AbstractionHeader,
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<TypedValue>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    header: AbstractionHeader,
    columns: Vec<Column>,
    rows: Vec<Vec<Value>>,
}

impl EventLogAbstraction {
    pub fn new(header: AbstractionHeader, columns: Vec<Column>) -> Self {
        EventLogAbstraction {
            header,
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push_row(&mut self, row: Vec<TypedValue>) -> Result<()> {
        self.check_row(self.rows.len(), &row)?;
        self.rows.push(row);
        Ok(())
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    fn check_row(&self, index: usize, row: &[TypedValue]) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::MalformedAbstraction(format!(
                "row {index} has {} cells for {} columns",
                row.len(),
                self.columns.len()
            )));
        }
        for (cell, column) in row.iter().zip(&self.columns) {
            if cell.kind() != column.kind {
                return Err(Error::MalformedAbstraction(format!(
                    "row {index}, column `{}`: expected {}, found {}",
                    column.name,
                    column.kind,
                    cell.kind()
                )));
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.header.abstraction_kind.is_empty() {
            return Err(Error::MalformedAbstraction("empty abstraction_kind".into()));
        }
        if let Some(c) = self
            .columns
            .iter()
            .find(|c| matches!(c.kind, ValueKind::List | ValueKind::Container))
        {
            return Err(Error::MalformedAbstraction(format!(
                "column `{}` has non-scalar kind {}",
                c.name, c.kind
            )));
        }
        for (i, row) in self.rows.iter().enumerate() {
            self.check_row(i, row)?;
        }
        self.header
            .privacy_metadata
            .validate()
            .map_err(|e| Error::MalformedAbstraction(e.to_string()))
    }
}

fn cell_to_json(value: &TypedValue) -> Value {
    match value {
        TypedValue::String(s) | TypedValue::Id(s) => json!(s),
        TypedValue::Integer(i) => json!(i),
        TypedValue::Real(r) if r.is_finite() => json!(r),
        TypedValue::Real(r) if r.is_nan() => json!("NaN"),
        TypedValue::Real(r) => json!(if *r > 0.0 { "INF" } else { "-INF" }),
        TypedValue::Boolean(b) => json!(b),
        TypedValue::Datetime(ts) => json!(format_timestamp(ts)),
        TypedValue::List(_) | TypedValue::Container(_) => {
            unreachable!("abstraction columns are scalar")
        }
    }
}

fn cell_from_json(value: &Value, column: &Column, row: usize) -> Result<TypedValue> {
    let bad = || {
        Error::MalformedAbstraction(format!(
            "row {row}, column `{}`: {value} is not a {}",
            column.name, column.kind
        ))
    };
    Ok(match column.kind {
        ValueKind::String => TypedValue::String(value.as_str().ok_or_else(bad)?.to_owned()),
        ValueKind::Id => TypedValue::Id(value.as_str().ok_or_else(bad)?.to_owned()),
        ValueKind::Integer => TypedValue::Integer(value.as_i64().ok_or_else(bad)?),
        ValueKind::Real => TypedValue::Real(match value {
            Value::String(s) => match s.as_str() {
                "NaN" => f64::NAN,
                "INF" => f64::INFINITY,
                "-INF" => f64::NEG_INFINITY,
                _ => return Err(bad()),
            },
            _ => value.as_f64().ok_or_else(bad)?,
        }),
        ValueKind::Boolean => TypedValue::Boolean(value.as_bool().ok_or_else(bad)?),
        ValueKind::Datetime => TypedValue::Datetime(
            value.as_str().and_then(parse_timestamp).ok_or_else(bad)?,
        ),
        ValueKind::List | ValueKind::Container => return Err(bad()),
    })
}

pub fn parse_ela(raw: &[u8]) -> Result<EventLogAbstraction> {
    let doc: Document =
        serde_json::from_slice(raw).map_err(|e| Error::MalformedAbstraction(e.to_string()))?;
    let mut ela = EventLogAbstraction::new(doc.header, doc.columns);
    for (i, row) in doc.rows.iter().enumerate() {
        if row.len() != ela.columns.len() {
            return Err(Error::MalformedAbstraction(format!(
                "row {i} has {} cells for {} columns",
                row.len(),
                ela.columns.len()
            )));
        }
        let cells = row
            .iter()
            .zip(&ela.columns)
            .map(|(v, c)| cell_from_json(v, c, i))
            .collect::<Result<Vec<_>>>()?;
        ela.rows.push(cells);
    }
    ela.validate()?;
    Ok(ela)
}

pub fn write_ela(ela: &EventLogAbstraction) -> Vec<u8> {
    let doc = Document {
        header: ela.header.clone(),
        columns: ela.columns.clone(),
        rows: ela
            .rows
            .iter()
            .map(|r| r.iter().map(cell_to_json).collect())
            .collect(),
    };
    let mut out = serde_json::to_vec_pretty(&doc).expect("abstraction serializes");
    out.push(b'\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header() -> AbstractionHeader {
        AbstractionHeader {
            abstraction_kind: "test".into(),
            origin_log_id: "0000".into(),
            technique: "unit".into(),
            privacy_metadata: PrivacyMetadata::default(),
        }
    }

    #[test]
    fn minimal_round_trip() {
        let ela = EventLogAbstraction::new(header(), vec![Column::new("x", ValueKind::Integer)]);
        let back = parse_ela(&write_ela(&ela)).unwrap();
        assert_eq!(back, ela);
    }

    #[test]
    fn typed_cells_round_trip() {
        let mut ela = EventLogAbstraction::new(
            header(),
            vec![
                Column::new("s", ValueKind::String),
                Column::new("r", ValueKind::Real),
                Column::new("b", ValueKind::Boolean),
                Column::new("t", ValueKind::Datetime),
            ],
        );
        ela.push_row(vec![
            TypedValue::string("▷"),
            TypedValue::Real(0.1),
            TypedValue::Boolean(true),
            TypedValue::Datetime(parse_timestamp("2021-06-10T10:00:00.5Z").unwrap()),
        ])
        .unwrap();
        ela.push_row(vec![
            TypedValue::string(""),
            TypedValue::Real(f64::INFINITY),
            TypedValue::Boolean(false),
            TypedValue::Datetime(parse_timestamp("1999-01-01T00:00:00Z").unwrap()),
        ])
        .unwrap();
        assert_eq!(parse_ela(&write_ela(&ela)).unwrap(), ela);
    }

    #[test]
    fn arity_mismatch_is_rejected() {
        let mut ela = EventLogAbstraction::new(header(), vec![Column::new("x", ValueKind::Integer)]);
        assert!(matches!(
            ela.push_row(vec![TypedValue::Integer(1), TypedValue::Integer(2)]),
            Err(Error::MalformedAbstraction(_))
        ));
        let raw = br#"{"header":{"abstraction_kind":"k","origin_log_id":"o","technique":"t","privacy_metadata":[]},
                       "columns":[{"name":"x","kind":"integer"}],"rows":[[1,2]]}"#;
        assert!(matches!(parse_ela(raw), Err(Error::MalformedAbstraction(_))));
    }

    #[test]
    fn missing_header_fields_are_rejected() {
        let raw = br#"{"header":{"abstraction_kind":"k","technique":"t","privacy_metadata":[]},
                       "columns":[],"rows":[]}"#;
        assert!(matches!(parse_ela(raw), Err(Error::MalformedAbstraction(_))));
        let raw = br#"{"header":{"abstraction_kind":"","origin_log_id":"o","technique":"t","privacy_metadata":[]},
                       "columns":[],"rows":[]}"#;
        assert!(matches!(parse_ela(raw), Err(Error::MalformedAbstraction(_))));
    }

    #[test]
    fn wrong_cell_kind_is_rejected() {
        let raw = br#"{"header":{"abstraction_kind":"k","origin_log_id":"o","technique":"t","privacy_metadata":[]},
                       "columns":[{"name":"x","kind":"integer"}],"rows":[["one"]]}"#;
        assert!(matches!(parse_ela(raw), Err(Error::MalformedAbstraction(_))));
    }
}
