//! Group-based privacy over activity background knowledge: timestamp
//! generalization followed by greedy whole-activity suppression.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;

use crate::anon::{generalize, suppress, Atom, GeneralizationScheme, Selector, SuppressTarget};
use crate::error::{Error, ParamError, Result};
use crate::knowledge::{group_sizes, BackgroundKnowledge, KnowledgeKind, TraceProfile};
use crate::metadata::OpContext;
use crate::model::{AttrRef, EventLog, Granularity, TypedValue, ACTIVITY_KEY, TIMESTAMP_KEY};

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TlkcParams {
    /// Timestamp granularity; `None` leaves timestamps alone.
    pub t: Option<Granularity>,
    pub l: usize,
    pub k: usize,
    pub c: f64,
    pub sensitive_attribute: Option<String>,
}

impl TlkcParams {
    pub fn new(l: usize, k: usize) -> Self {
        TlkcParams {
            t: None,
            l,
            k,
            c: 1.0,
            sensitive_attribute: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut errors = Vec::new();
        if self.l < 1 {
            errors.push(ParamError::new("l", "must be at least 1"));
        }
        if self.k < 1 {
            errors.push(ParamError::new("k", "must be at least 1"));
        }
        if !(self.c > 0.0 && self.c <= 1.0) {
            errors.push(ParamError::new("c", "must lie in (0, 1]"));
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::ParameterValidation(errors))
        }
    }
}

/// Per trace, the set of sensitive values it carries (rendered with their kind).
fn sensitive_values(log: &EventLog, key: &str) -> Result<Vec<BTreeSet<String>>> {
    let target = log.resolve(key)?;
    let tag = |v: &TypedValue| format!("{}:{}", v.kind(), v);
    Ok(log
        .traces
        .iter()
        .map(|t| match &target {
            AttrRef::Trace(k) => t.get(k).map(|v| tag(&v)).into_iter().collect(),
            AttrRef::Event(k) => t.events.iter().filter_map(|e| e.get(k).map(|v| tag(&v))).collect(),
        })
        .collect())
}

fn violations_in(
    groups: &BTreeMap<BackgroundKnowledge, Vec<usize>>,
    sensitive: Option<&[BTreeSet<String>]>,
    params: &TlkcParams,
) -> BTreeSet<BackgroundKnowledge> {
    groups
        .par_iter()
        .filter(|(_, members)| {
            let n = members.len();
            if n > 0 && n < params.k {
                return true;
            }
            let Some(sensitive) = sensitive else {
                return false;
            };
            let mut freq: BTreeMap<&str, usize> = BTreeMap::new();
            for &m in members.iter() {
                for v in &sensitive[m] {
                    *freq.entry(v).or_insert(0) += 1;
                }
            }
            let top = freq.values().copied().max().unwrap_or(0);
            n > 0 && top as f64 / n as f64 > params.c
        })
        .map(|(k, _)| k.clone())
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

/// Knowledge instances of size at most `l`, drawn from the log, whose group
/// is smaller than `k` or reveals a sensitive value with confidence above `c`.
pub fn find_violations(
    log: &EventLog,
    params: &TlkcParams,
    kind: KnowledgeKind,
) -> Result<BTreeSet<BackgroundKnowledge>> {
    params.validate()?;
    let sensitive = match &params.sensitive_attribute {
        Some(key) => Some(sensitive_values(log, key)?),
        None => None,
    };
    let groups = group_sizes(&TraceProfile::of_log(log), kind, params.l);
    Ok(violations_in(&groups, sensitive.as_deref(), params))
}

fn without(profiles: &[TraceProfile], activity: &str) -> Vec<TraceProfile> {
    profiles
        .iter()
        .map(|p| TraceProfile::new(p.sequence.iter().filter(|a| *a != activity).cloned().collect()))
        .collect()
}

/// Smallest group of any occurring instance that mentions each activity.
fn exposure(groups: &BTreeMap<BackgroundKnowledge, Vec<usize>>) -> BTreeMap<&str, usize> {
    let mut out: BTreeMap<&str, usize> = BTreeMap::new();
    for (bk, members) in groups {
        for a in &bk.items {
            let e = out.entry(a.as_str()).or_insert(usize::MAX);
            *e = (*e).min(members.len());
        }
    }
    out
}

/// Generalizes timestamps to `t`, then removes whole activities until no
/// violation remains. Each round removes the most exposed activity, the one
/// occurring in the smallest group; ties go to the lexicographically smallest.
/// The order never looks at `k`, so a larger `k` only extends the removals.
///
/// `seed` is accepted for interface stability; the deterministic tie-break
/// makes the result seed-independent.
pub fn enforce(
    log: &EventLog,
    params: &TlkcParams,
    kind: KnowledgeKind,
    _seed: u64,
    ctx: &OpContext,
) -> Result<EventLog> {
    params.validate()?;
    let sensitive = match &params.sensitive_attribute {
        Some(key) => Some(sensitive_values(log, key)?),
        None => None,
    };
    let mut current = match params.t {
        Some(g) => generalize(log, TIMESTAMP_KEY, &GeneralizationScheme::Timestamp(g), ctx)?,
        None => log.clone(),
    };
    let mut profiles = TraceProfile::of_log(&current);
    loop {
        let groups = group_sizes(&profiles, kind, params.l);
        if violations_in(&groups, sensitive.as_deref(), params).is_empty() {
            break;
        }
        let activity = exposure(&groups)
            .into_iter()
            .min_by_key(|(a, e)| (*e, *a))
            .map(|(a, _)| a.to_owned())
            .expect("a violation implies an occurring activity");
        let selector = Selector::events(vec![Atom::eq(ACTIVITY_KEY, TypedValue::String(activity.clone()))]);
        current = suppress(&current, &selector, &SuppressTarget::WholeMatch, ctx)?;
        if current.event_count() == 0 {
            return Err(Error::EmptyResult);
        }
        profiles = without(&profiles, &activity);
    }
    Ok(current)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::fix1;
    use crate::metadata::OperationKind;
    use crate::model::parse_timestamp;

    fn ctx() -> OpContext {
        OpContext::at(parse_timestamp("2021-07-01T00:00:00Z").unwrap())
    }

    fn set(items: &[&str]) -> BackgroundKnowledge {
        BackgroundKnowledge::new(KnowledgeKind::Set, items.iter().copied()).unwrap()
    }

    #[test]
    fn fix1_violations() {
        let log = fix1();
        let v = find_violations(&log, &TlkcParams::new(1, 2), KnowledgeKind::Set).unwrap();
        assert_eq!(v, BTreeSet::from([set(&["d"])]));
        let v = find_violations(&log, &TlkcParams::new(1, 3), KnowledgeKind::Set).unwrap();
        assert_eq!(v, BTreeSet::from([set(&["b"]), set(&["c"]), set(&["d"])]));
        assert!(find_violations(&log, &TlkcParams::new(2, 1), KnowledgeKind::Subsequence).unwrap().is_empty());
    }

    #[test]
    fn confidence_violations() {
        let mut log = fix1();
        for (t, dx) in log.traces.iter_mut().zip(["flu", "flu", "cold"]) {
            t.attributes.insert("diagnosis".into(), TypedValue::string(dx));
        }
        let mut p = TlkcParams::new(1, 1);
        p.sensitive_attribute = Some("diagnosis".into());
        p.c = 0.7;
        let v = find_violations(&log, &p, KnowledgeKind::Set).unwrap();
        // {b},{c} -> flu with confidence 1; {d} -> cold with 1; {a} -> flu 2/3
        assert_eq!(v, BTreeSet::from([set(&["b"]), set(&["c"]), set(&["d"])]));
    }

    #[test]
    fn enforce_fix1_removes_d() {
        let out = enforce(&fix1(), &TlkcParams::new(1, 2), KnowledgeKind::Set, 0, &ctx()).unwrap();
        assert_eq!(out.traces[2].activities(), vec!["a"]);
        assert_eq!(out.event_count(), 7);
        assert!(find_violations(&out, &TlkcParams::new(1, 2), KnowledgeKind::Set).unwrap().is_empty());
        assert_eq!(out.privacy_metadata.kinds(), vec![OperationKind::Suppression]);
    }

    #[test]
    fn enforce_with_granularity_records_generalization_first() {
        let mut p = TlkcParams::new(1, 2);
        p.t = Some(Granularity::Day);
        let out = enforce(&fix1(), &p, KnowledgeKind::Set, 0, &ctx()).unwrap();
        assert_eq!(
            out.privacy_metadata.kinds(),
            vec![OperationKind::Generalization, OperationKind::Suppression]
        );
    }

    #[test]
    fn k1_is_identity() {
        let log = fix1();
        let out = enforce(&log, &TlkcParams::new(1, 1), KnowledgeKind::Multiset, 0, &ctx()).unwrap();
        assert_eq!(out, log);
    }

    #[test]
    fn impossible_k_empties_the_log() {
        assert!(matches!(
            enforce(&fix1(), &TlkcParams::new(1, 4), KnowledgeKind::Set, 0, &ctx()),
            Err(Error::EmptyResult)
        ));
    }

    #[test]
    fn invalid_params_are_reported_per_field() {
        let mut p = TlkcParams::new(0, 0);
        p.c = 1.5;
        match p.validate() {
            Err(Error::ParameterValidation(errs)) => {
                let names: Vec<&str> = errs.iter().map(|e| e.param.as_str()).collect();
                assert_eq!(names, vec!["l", "k", "c"]);
            }
            other => panic!("{other:?}"),
        }
    }
}
