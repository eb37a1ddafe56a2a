//! Disclosure risk under the prosecutor model and log-level utility measures.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, ParamError, Result};
use crate::knowledge::{group_sizes, KnowledgeKind, TraceProfile};
use crate::model::EventLog;
use crate::stats::{df_graph, variants, DirectlyFollowsGraph};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub knowledge_kind: KnowledgeKind,
    pub l: usize,
    pub uniqueness_rate: f64,
    pub avg_reid_probability: f64,
    pub per_case_min_group: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityReport {
    pub variant_preservation: f64,
    pub df_distance: f64,
    pub event_count_ratio: f64,
}

/// Risk of each case against knowledge of size at most `l` taken from its own
/// trace. A case with an empty trace offers no knowledge and hides among all
/// cases.
pub fn disclosure_risk(log: &EventLog, kind: KnowledgeKind, l: usize) -> Result<RiskReport> {
    if l < 1 {
        return Err(Error::ParameterValidation(vec![ParamError::new("l", "must be at least 1")]));
    }
    let profiles = TraceProfile::of_log(log);
    let groups: BTreeMap<_, usize> = group_sizes(&profiles, kind, l)
        .into_iter()
        .map(|(k, members)| (k, members.len()))
        .collect();
    let n = log.traces.len();
    let mins: Vec<usize> = profiles
        .par_iter()
        .map(|p| {
            p.instances(kind, l)
                .iter()
                .map(|k| groups[k])
                .min()
                .unwrap_or(n)
        })
        .collect();

    let (uniqueness_rate, avg_reid_probability) = if n == 0 {
        (0.0, 0.0)
    } else {
        let unique = mins.iter().filter(|m| **m == 1).count();
        let reid: f64 = mins.iter().map(|m| 1.0 / *m as f64).sum();
        (unique as f64 / n as f64, reid / n as f64)
    };
    Ok(RiskReport {
        knowledge_kind: kind,
        l,
        uniqueness_rate,
        avg_reid_probability,
        per_case_min_group: log.traces.iter().map(|t| t.case_id.clone()).zip(mins).collect(),
    })
}

/// Half the L1 distance between the relative pair frequencies of two DFGs.
/// A graph without pairs is at distance 1 from any graph with pairs.
pub fn df_distance(a: &DirectlyFollowsGraph, b: &DirectlyFollowsGraph) -> f64 {
    let (ta, tb) = (a.total_pairs(), b.total_pairs());
    match (ta, tb) {
        (0, 0) => return 0.0,
        (0, _) | (_, 0) => return 1.0,
        _ => {}
    }
    let keys: BTreeSet<_> = a.pair_counts.keys().chain(b.pair_counts.keys()).collect();
    let l1: f64 = keys
        .into_iter()
        .map(|k| {
            let pa = a.pair_counts.get(k).copied().unwrap_or(0) as f64 / ta as f64;
            let pb = b.pair_counts.get(k).copied().unwrap_or(0) as f64 / tb as f64;
            (pa - pb).abs()
        })
        .sum();
    // rounding can push the sum a hair past 2
    (l1 / 2.0).min(1.0)
}

/// Variant preservation, DFG distance and event count ratio of an anonymized
/// log against its original. An original without traces yields (1, 0, 1).
pub fn data_utility(original: &EventLog, anonymized: &EventLog) -> UtilityReport {
    if original.traces.is_empty() {
        return UtilityReport {
            variant_preservation: 1.0,
            df_distance: 0.0,
            event_count_ratio: 1.0,
        };
    }
    let (vo, va) = (variants(original), variants(anonymized));
    let kept = vo.keys().filter(|v| va.contains_key(*v)).count();
    let (eo, ea) = (original.event_count(), anonymized.event_count());
    let event_count_ratio = match (eo, ea) {
        (0, 0) => 1.0,
        (0, n) => n as f64,
        (o, n) => n as f64 / o as f64,
    };
    UtilityReport {
        variant_preservation: kept as f64 / vo.len() as f64,
        df_distance: df_distance(&df_graph(original), &df_graph(anonymized)),
        event_count_ratio,
    }
}
