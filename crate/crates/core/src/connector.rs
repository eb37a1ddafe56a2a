//! Encrypted directly-follows abstraction.
//!
//! A log is reduced to aggregated directly-follows counts whose activity
//! labels are keyed pseudonyms. Starts and ends are rows against the plaintext
//! markers `▷` and `□`. Only a key holder who knows the alphabet can map the
//! tokens back.

use std::collections::{BTreeMap, BTreeSet};

use crate::anon::{KeyMode, KeySpec};
use crate::ela::{AbstractionHeader, Column, EventLogAbstraction};
use crate::error::{Error, Result};
use crate::metadata::{parameter_digest, Level, OpContext, OperationKind, RecordFields};
use crate::model::{EventLog, TypedValue, ValueKind, ACTIVITY_KEY};
use crate::stats::{df_graph, DirectlyFollowsGraph};
use crate::xes::log_id;

pub const ABSTRACTION_KIND: &str = "connector-dfg";
pub const START_MARKER: &str = "▷";
pub const END_MARKER: &str = "□";

const COLUMNS: [(&str, ValueKind); 5] = [
    ("enc_source", ValueKind::String),
    ("enc_target", ValueKind::String),
    ("count", ValueKind::Integer),
    ("source_is_start", ValueKind::Boolean),
    ("target_is_end", ValueKind::Boolean),
];

/// Encodes the log's DFG under a deterministic key. Rows are ordered by token,
/// so nothing about the plaintext order leaks.
pub fn encode(log: &EventLog, key: &KeySpec, ctx: &OpContext) -> Result<EventLogAbstraction> {
    if key.mode() != KeyMode::PseudonymizeDeterministic {
        return Err(Error::InvalidKey(format!(
            "key `{}` must be in pseudonymize-deterministic mode",
            key.key_id()
        )));
    }
    let alphabet = log.alphabet();
    for marker in [START_MARKER, END_MARKER] {
        if alphabet.contains(marker) {
            return Err(Error::ReservedSymbolClash(marker.to_owned()));
        }
    }
    let tokens: BTreeMap<&str, String> = alphabet.iter().map(|a| (a.as_str(), key.token(a))).collect();
    let dfg = df_graph(log);

    // (source, target) -> (count, source_is_start, target_is_end)
    let mut rows: BTreeMap<(String, String), (u64, bool, bool)> = BTreeMap::new();
    for ((a, b), n) in &dfg.pair_counts {
        rows.insert((tokens[a.as_str()].clone(), tokens[b.as_str()].clone()), (*n, false, false));
    }
    for (a, n) in &dfg.start_counts {
        rows.insert((START_MARKER.to_owned(), tokens[a.as_str()].clone()), (*n, true, false));
    }
    for (a, n) in &dfg.end_counts {
        rows.insert((tokens[a.as_str()].clone(), END_MARKER.to_owned()), (*n, false, true));
    }

    let mut metadata = log.privacy_metadata.clone();
    metadata.push(RecordFields::new(
        OperationKind::Cryptography,
        Level::Event,
        [ACTIVITY_KEY],
        parameter_digest(&[
            ("technique", ABSTRACTION_KIND.to_owned()),
            ("key_id", key.key_id().to_owned()),
        ]),
        ctx,
    ));
    let header = AbstractionHeader {
        abstraction_kind: ABSTRACTION_KIND.to_owned(),
        origin_log_id: log_id(log),
        technique: ABSTRACTION_KIND.to_owned(),
        privacy_metadata: metadata,
    };
    let columns = COLUMNS.iter().map(|(n, k)| Column::new(*n, *k)).collect();
    let mut ela = EventLogAbstraction::new(header, columns);
    for ((source, target), (count, is_start, is_end)) in rows {
        ela.push_row(vec![
            TypedValue::String(source),
            TypedValue::String(target),
            TypedValue::Integer(count as i64),
            TypedValue::Boolean(is_start),
            TypedValue::Boolean(is_end),
        ])?;
    }
    Ok(ela)
}

/// Recovers the labelled DFG by matching tokens against the tokens of every
/// dictionary label under `key`.
pub fn decode(ela: &EventLogAbstraction, key: &KeySpec, dictionary: &BTreeSet<String>) -> Result<DirectlyFollowsGraph> {
    if ela.header.abstraction_kind != ABSTRACTION_KIND {
        return Err(Error::MalformedAbstraction(format!(
            "expected abstraction kind `{ABSTRACTION_KIND}`, found `{}`",
            ela.header.abstraction_kind
        )));
    }
    let index = |name: &str| {
        ela.column_index(name)
            .ok_or_else(|| Error::MalformedAbstraction(format!("missing column `{name}`")))
    };
    let [src, dst, cnt, first, last] = [
        index("enc_source")?,
        index("enc_target")?,
        index("count")?,
        index("source_is_start")?,
        index("target_is_end")?,
    ];
    let labels: BTreeMap<String, &String> = dictionary.iter().map(|a| (key.token(a), a)).collect();
    let resolve = |cell: &TypedValue| -> Result<String> {
        let token = cell
            .as_str()
            .ok_or_else(|| Error::MalformedAbstraction("token cells must be strings".into()))?;
        labels
            .get(token)
            .map(|a| (*a).clone())
            .ok_or_else(|| Error::UnresolvedToken(token.to_owned()))
    };
    let flag = |cell: &TypedValue| match cell {
        TypedValue::Boolean(b) => Ok(*b),
        _ => Err(Error::MalformedAbstraction("flag cells must be booleans".into())),
    };

    let mut dfg = DirectlyFollowsGraph::default();
    for row in &ela.rows {
        let count = match &row[cnt] {
            TypedValue::Integer(n) if *n > 0 => *n as u64,
            other => return Err(Error::MalformedAbstraction(format!("invalid count `{other}`"))),
        };
        match (flag(&row[first])?, flag(&row[last])?) {
            (true, false) if row[src].as_str() == Some(START_MARKER) => {
                *dfg.start_counts.entry(resolve(&row[dst])?).or_insert(0) += count;
            }
            (false, true) if row[dst].as_str() == Some(END_MARKER) => {
                *dfg.end_counts.entry(resolve(&row[src])?).or_insert(0) += count;
            }
            (false, false) => {
                *dfg.pair_counts.entry((resolve(&row[src])?, resolve(&row[dst])?)).or_insert(0) += count;
            }
            _ => return Err(Error::MalformedAbstraction("inconsistent start/end flags".into())),
        }
    }
    Ok(dfg)
}
