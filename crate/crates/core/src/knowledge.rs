//! Adversary background knowledge over activities and the cases it matches.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::EventLog;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KnowledgeKind {
    Set,
    Multiset,
    Subsequence,
}

impl KnowledgeKind {
    pub const ALL: [KnowledgeKind; 3] = [KnowledgeKind::Set, KnowledgeKind::Multiset, KnowledgeKind::Subsequence];

    pub fn parse(raw: &str) -> Option<KnowledgeKind> {
        match raw {
            "set" => Some(KnowledgeKind::Set),
            "multiset" => Some(KnowledgeKind::Multiset),
            "subsequence" => Some(KnowledgeKind::Subsequence),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            KnowledgeKind::Set => "set",
            KnowledgeKind::Multiset => "multiset",
            KnowledgeKind::Subsequence => "subsequence",
        }
    }
}

impl fmt::Display for KnowledgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// What an adversary knows about one case. Items are kept in normal form:
/// sorted and deduplicated for sets, sorted for multisets, in order for
/// subsequences.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
pub struct BackgroundKnowledge {
    pub kind: KnowledgeKind,
    pub items: Vec<String>,
}

impl BackgroundKnowledge {
    pub fn new<I, S>(kind: KnowledgeKind, items: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut items: Vec<String> = items.into_iter().map(Into::into).collect();
        if items.is_empty() {
            return Err(Error::InvalidOperation("background knowledge needs at least one item".into()));
        }
        match kind {
            KnowledgeKind::Set => {
                items.sort();
                items.dedup();
            }
            KnowledgeKind::Multiset => items.sort(),
            KnowledgeKind::Subsequence => {}
        }
        Ok(BackgroundKnowledge { kind, items })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Whether a trace with this activity sequence is consistent with the knowledge.
    pub fn matches(&self, trace: &TraceProfile) -> bool {
        match self.kind {
            KnowledgeKind::Set => self.items.iter().all(|a| trace.counts.contains_key(a)),
            KnowledgeKind::Multiset => {
                let mut i = 0;
                while i < self.items.len() {
                    let a = &self.items[i];
                    let mut need = 0;
                    while i < self.items.len() && &self.items[i] == a {
                        need += 1;
                        i += 1;
                    }
                    if trace.counts.get(a).copied().unwrap_or(0) < need {
                        return false;
                    }
                }
                true
            }
            KnowledgeKind::Subsequence => {
                let mut it = trace.sequence.iter();
                self.items.iter().all(|a| it.any(|b| b == a))
            }
        }
    }
}

impl fmt::Display for BackgroundKnowledge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (open, close) = match self.kind {
            KnowledgeKind::Set => ("{", "}"),
            KnowledgeKind::Multiset => ("[", "]"),
            KnowledgeKind::Subsequence => ("<", ">"),
        };
        write!(f, "{open}{}{close}", self.items.join(","))
    }
}

/// Activity sequence of a trace with its multiplicities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceProfile {
    pub sequence: Vec<String>,
    pub counts: BTreeMap<String, usize>,
}

impl TraceProfile {
    pub fn new(sequence: Vec<String>) -> Self {
        let mut counts = BTreeMap::new();
        for a in &sequence {
            *counts.entry(a.clone()).or_insert(0) += 1;
        }
        TraceProfile { sequence, counts }
    }

    pub fn of_log(log: &EventLog) -> Vec<TraceProfile> {
        log.traces.iter().map(|t| TraceProfile::new(t.activities())).collect()
    }

    /// Every distinct knowledge instance of size `1..=max_len` that this trace satisfies.
    pub fn instances(&self, kind: KnowledgeKind, max_len: usize) -> BTreeSet<BackgroundKnowledge> {
        let mut out = BTreeSet::new();
        let mut prefix = Vec::new();
        match kind {
            KnowledgeKind::Set => {
                let distinct: Vec<&String> = self.counts.keys().collect();
                subsets(&distinct, 0, max_len, &mut prefix, &mut |items| {
                    out.insert(BackgroundKnowledge { kind, items: items.to_vec() });
                });
            }
            KnowledgeKind::Multiset => {
                let counts: Vec<(&String, usize)> = self.counts.iter().map(|(a, c)| (a, *c)).collect();
                submultisets(&counts, 0, max_len, &mut prefix, &mut |items| {
                    out.insert(BackgroundKnowledge { kind, items: items.to_vec() });
                });
            }
            KnowledgeKind::Subsequence => {
                let alphabet: Vec<&String> = self.counts.keys().collect();
                subsequences(&self.sequence, &alphabet, 0, max_len, &mut prefix, &mut |items| {
                    out.insert(BackgroundKnowledge { kind, items: items.to_vec() });
                });
            }
        }
        out
    }
}

fn subsets(items: &[&String], from: usize, left: usize, prefix: &mut Vec<String>, emit: &mut impl FnMut(&[String])) {
    if left == 0 {
        return;
    }
    for i in from..items.len() {
        prefix.push(items[i].clone());
        emit(prefix);
        subsets(items, i + 1, left - 1, prefix, emit);
        prefix.pop();
    }
}

fn submultisets(
    counts: &[(&String, usize)],
    from: usize,
    left: usize,
    prefix: &mut Vec<String>,
    emit: &mut impl FnMut(&[String]),
) {
    if from == counts.len() {
        if !prefix.is_empty() {
            emit(prefix);
        }
        return;
    }
    let (a, c) = counts[from];
    let base = prefix.len();
    for take in 0..=c.min(left) {
        if take > 0 {
            prefix.push(a.clone());
        }
        submultisets(counts, from + 1, left - take, prefix, emit);
    }
    prefix.truncate(base);
}

/// Distinct subsequences, each reached once by always embedding at the
/// earliest next occurrence.
fn subsequences(
    seq: &[String],
    alphabet: &[&String],
    pos: usize,
    left: usize,
    prefix: &mut Vec<String>,
    emit: &mut impl FnMut(&[String]),
) {
    if left == 0 {
        return;
    }
    for a in alphabet {
        if let Some(offset) = seq[pos..].iter().position(|b| b == *a) {
            prefix.push((*a).clone());
            emit(prefix);
            subsequences(seq, alphabet, pos + offset + 1, left - 1, prefix, emit);
            prefix.pop();
        }
    }
}

/// Case ids of all traces consistent with the knowledge.
pub fn matching_cases(log: &EventLog, knowledge: &BackgroundKnowledge) -> BTreeSet<String> {
    log.traces
        .par_iter()
        .filter(|t| knowledge.matches(&TraceProfile::new(t.activities())))
        .map(|t| t.case_id.clone())
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

/// Group sizes of every distinct instance of size `1..=max_len` occurring in
/// some trace.
pub(crate) fn group_sizes(
    profiles: &[TraceProfile],
    kind: KnowledgeKind,
    max_len: usize,
) -> BTreeMap<BackgroundKnowledge, Vec<usize>> {
    let instances: BTreeSet<BackgroundKnowledge> = profiles
        .par_iter()
        .map(|p| p.instances(kind, max_len))
        .reduce(BTreeSet::new, |mut a, b| {
            a.extend(b);
            a
        });
    instances
        .into_par_iter()
        .map(|k| {
            let members: Vec<usize> = profiles
                .iter()
                .enumerate()
                .filter(|(_, p)| k.matches(p))
                .map(|(i, _)| i)
                .collect();
            (k, members)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}
