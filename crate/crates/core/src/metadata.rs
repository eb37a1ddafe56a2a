//! Privacy metadata: the ordered, append-only record of anonymization
//! operations applied to a log.

use std::collections::BTreeSet;
use std::fmt;

use chrono::Utc;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{to_millis, EventLog, Timestamp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OperationKind {
    Suppression,
    Addition,
    Substitution,
    Condensation,
    Swapping,
    Generalization,
    Cryptography,
}

impl OperationKind {
    pub const ALL: [OperationKind; 7] = [
        OperationKind::Suppression,
        OperationKind::Addition,
        OperationKind::Substitution,
        OperationKind::Condensation,
        OperationKind::Swapping,
        OperationKind::Generalization,
        OperationKind::Cryptography,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            OperationKind::Suppression => "suppression",
            OperationKind::Addition => "addition",
            OperationKind::Substitution => "substitution",
            OperationKind::Condensation => "condensation",
            OperationKind::Swapping => "swapping",
            OperationKind::Generalization => "generalization",
            OperationKind::Cryptography => "cryptography",
        }
    }

    pub fn parse(raw: &str) -> Option<OperationKind> {
        OperationKind::ALL.into_iter().find(|k| k.as_str() == raw)
    }
}

impl fmt::Display for OperationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Event,
    Trace,
    Attribute,
    Log,
}

impl Level {
    pub fn as_str(self) -> &'static str {
        match self {
            Level::Event => "event",
            Level::Trace => "trace",
            Level::Attribute => "attribute",
            Level::Log => "log",
        }
    }

    pub fn parse(raw: &str) -> Option<Level> {
        Some(match raw {
            "event" => Level::Event,
            "trace" => Level::Trace,
            "attribute" => Level::Attribute,
            "log" => Level::Log,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperationRecord {
    pub seq: u32,
    pub operation_kind: OperationKind,
    pub level: Level,
    pub target_attributes: BTreeSet<String>,
    pub parameter_digest: String,
    pub applied_at: Timestamp,
}

/// Everything in an [`OperationRecord`] except its sequence number.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordFields {
    pub operation_kind: OperationKind,
    pub level: Level,
    pub target_attributes: BTreeSet<String>,
    pub parameter_digest: String,
    pub applied_at: Timestamp,
}

impl RecordFields {
    pub fn new<I, S>(
        operation_kind: OperationKind,
        level: Level,
        targets: I,
        parameter_digest: String,
        ctx: &OpContext,
    ) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        RecordFields {
            operation_kind,
            level,
            target_attributes: targets.into_iter().map(Into::into).collect(),
            parameter_digest,
            applied_at: ctx.applied_at,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PrivacyMetadata {
    pub records: Vec<OperationRecord>,
}

impl PrivacyMetadata {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn push(&mut self, fields: RecordFields) -> &OperationRecord {
        let seq = self.records.len() as u32 + 1;
        self.records.push(OperationRecord {
            seq,
            operation_kind: fields.operation_kind,
            level: fields.level,
            target_attributes: fields.target_attributes,
            parameter_digest: fields.parameter_digest,
            applied_at: to_millis(fields.applied_at),
        });
        self.records.last().expect("just pushed")
    }

    pub fn kinds(&self) -> Vec<OperationKind> {
        self.records.iter().map(|r| r.operation_kind).collect()
    }

    /// Checks that sequence numbers run 1..=n in order.
    pub fn validate(&self) -> Result<()> {
        for (i, record) in self.records.iter().enumerate() {
            if record.seq as usize != i + 1 {
                return Err(Error::InvalidOperation(format!(
                    "privacy metadata record at position {} has seq {}",
                    i + 1,
                    record.seq
                )));
            }
        }
        Ok(())
    }
}

/// Returns a copy of `log` with one more operation record. The input is untouched.
pub fn attach_operation_record(log: &EventLog, fields: RecordFields) -> EventLog {
    let mut out = log.clone();
    out.privacy_metadata.push(fields);
    out
}

/// Ambient inputs shared by every transformation.
///
/// `applied_at` is injected rather than read from the clock so that
/// transformations stay pure functions of their inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OpContext {
    pub applied_at: Timestamp,
}

impl OpContext {
    pub fn at(applied_at: Timestamp) -> Self {
        OpContext {
            applied_at: to_millis(applied_at),
        }
    }

    pub fn now() -> Self {
        OpContext::at(Utc::now())
    }

    /// Latest event timestamp of `log`, or the epoch for a log without events.
    pub fn latest_event(log: &EventLog) -> Self {
        OpContext::at(log.events().map(|e| e.timestamp).max().unwrap_or(chrono::DateTime::UNIX_EPOCH))
    }
}

/// Opaque short digest over named parameters. Callers never pass key material.
pub fn parameter_digest(parts: &[(&str, String)]) -> String {
    let mut hasher = Sha256::new();
    for (name, value) in parts {
        hasher.update(name.as_bytes());
        hasher.update([0x1f]);
        hasher.update(value.as_bytes());
        hasher.update([0x1e]);
    }
    hex::encode(&hasher.finalize()[..8])
}

/// Content address of a byte string: the first 16 hex characters of its SHA-256.
pub fn content_id(bytes: &[u8]) -> String {
    hex::encode(&Sha256::digest(bytes)[..8])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_timestamp;

    fn ctx() -> OpContext {
        OpContext::at(parse_timestamp("2021-06-11T00:00:00Z").unwrap())
    }

    fn fields(kind: OperationKind) -> RecordFields {
        RecordFields::new(kind, Level::Event, ["concept:name"], parameter_digest(&[]), &ctx())
    }

    #[test]
    fn attach_to_empty_metadata() {
        let log = EventLog::default();
        let out = attach_operation_record(&log, fields(OperationKind::Suppression));
        assert_eq!(out.privacy_metadata.len(), 1);
        assert_eq!(out.privacy_metadata.records[0].seq, 1);
        assert!(log.privacy_metadata.is_empty());
    }

    #[test]
    fn attach_continues_sequence() {
        let mut log = EventLog::default();
        log.privacy_metadata.push(fields(OperationKind::Swapping));
        log.privacy_metadata.push(fields(OperationKind::Addition));
        let out = attach_operation_record(&log, fields(OperationKind::Suppression));
        assert_eq!(out.privacy_metadata.len(), 3);
        assert_eq!(out.privacy_metadata.records[2].seq, 3);
        out.privacy_metadata.validate().unwrap();
    }

    #[test]
    fn successive_attaches_keep_order() {
        let log = EventLog::default();
        let once = attach_operation_record(&log, fields(OperationKind::Generalization));
        let twice = attach_operation_record(&once, fields(OperationKind::Cryptography));
        assert_eq!(
            twice.privacy_metadata.kinds(),
            vec![OperationKind::Generalization, OperationKind::Cryptography]
        );
    }

    #[test]
    fn digest_is_short_and_order_sensitive() {
        let a = parameter_digest(&[("k", "2".into()), ("l", "1".into())]);
        let b = parameter_digest(&[("l", "1".into()), ("k", "2".into())]);
        assert_eq!(a.len(), 16);
        assert_ne!(a, b);
        assert_eq!(a, parameter_digest(&[("k", "2".into()), ("l", "1".into())]));
    }

    #[test]
    fn gaps_in_sequence_are_rejected() {
        let mut md = PrivacyMetadata::default();
        md.push(fields(OperationKind::Addition));
        md.records[0].seq = 2;
        assert!(md.validate().is_err());
    }
}
