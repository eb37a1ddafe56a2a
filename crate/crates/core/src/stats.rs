//! Variant and directly-follows statistics.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::{EventLog, Trace};

pub type Variant = Vec<String>;
pub type VariantCounts = BTreeMap<Variant, u64>;

/// Counts traces per activity sequence.
pub fn variants(log: &EventLog) -> VariantCounts {
    log.traces
        .par_iter()
        .fold(VariantCounts::new, |mut acc, trace| {
            *acc.entry(trace.activities()).or_insert(0) += 1;
            acc
        })
        .reduce(VariantCounts::new, merge_counts)
}

fn merge_counts<K: Ord>(mut a: BTreeMap<K, u64>, b: BTreeMap<K, u64>) -> BTreeMap<K, u64> {
    for (k, v) in b {
        *a.entry(k).or_insert(0) += v;
    }
    a
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirectlyFollowsGraph {
    #[serde(with = "pair_list")]
    pub pair_counts: BTreeMap<(String, String), u64>,
    pub start_counts: BTreeMap<String, u64>,
    pub end_counts: BTreeMap<String, u64>,
}

impl DirectlyFollowsGraph {
    fn add_trace(mut self, trace: &Trace) -> Self {
        let (Some(first), Some(last)) = (trace.events.first(), trace.events.last()) else {
            return self;
        };
        *self.start_counts.entry(first.activity.clone()).or_insert(0) += 1;
        *self.end_counts.entry(last.activity.clone()).or_insert(0) += 1;
        for pair in trace.events.windows(2) {
            *self
                .pair_counts
                .entry((pair[0].activity.clone(), pair[1].activity.clone()))
                .or_insert(0) += 1;
        }
        self
    }

    fn merge(self, other: Self) -> Self {
        DirectlyFollowsGraph {
            pair_counts: merge_counts(self.pair_counts, other.pair_counts),
            start_counts: merge_counts(self.start_counts, other.start_counts),
            end_counts: merge_counts(self.end_counts, other.end_counts),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.pair_counts.is_empty() && self.start_counts.is_empty() && self.end_counts.is_empty()
    }

    pub fn total_pairs(&self) -> u64 {
        self.pair_counts.values().sum()
    }
}

/// Pair counts travel as `[{"source", "target", "count"}]` since JSON keys must be strings.
mod pair_list {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Pair {
        source: String,
        target: String,
        count: u64,
    }

    pub fn serialize<S: Serializer>(map: &BTreeMap<(String, String), u64>, s: S) -> Result<S::Ok, S::Error> {
        let pairs: Vec<Pair> = map
            .iter()
            .map(|((a, b), n)| Pair {
                source: a.clone(),
                target: b.clone(),
                count: *n,
            })
            .collect();
        pairs.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<(String, String), u64>, D::Error> {
        let pairs = Vec::<Pair>::deserialize(d)?;
        Ok(pairs.into_iter().map(|p| ((p.source, p.target), p.count)).collect())
    }
}

/// Directly-follows graph with start and end frequencies.
pub fn df_graph(log: &EventLog) -> DirectlyFollowsGraph {
    log.traces
        .par_iter()
        .fold(DirectlyFollowsGraph::default, DirectlyFollowsGraph::add_trace)
        .reduce(DirectlyFollowsGraph::default, DirectlyFollowsGraph::merge)
}
