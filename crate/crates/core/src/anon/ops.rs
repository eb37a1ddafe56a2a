use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::metadata::{parameter_digest, Level, OpContext, OperationKind, RecordFields};
use crate::model::{AttrRef, EventLog, Granularity, Trace, TypedValue, ValueKind};
use crate::rng::stream_for;
use crate::stats::df_graph;
use crate::timing::TimingModel;

use super::selector::{Selector, SelectorLevel};
use super::taxonomy::Taxonomy;
use super::{check_unique_cases, rewrite_values, sort_if_time};

fn level_of(target: &AttrRef) -> Level {
    match target {
        AttrRef::Event(_) => Level::Event,
        AttrRef::Trace(_) => Level::Trace,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SuppressTarget {
    /// Remove the matched events or traces.
    WholeMatch,
    /// Remove only these attributes from the matches.
    Attributes(Vec<String>),
}

/// Removes matched events or traces, or strips attributes from them.
pub fn suppress(
    log: &EventLog,
    selector: &Selector,
    target: &SuppressTarget,
    ctx: &OpContext,
) -> Result<EventLog> {
    let bound = selector.bind(log)?;
    let mut out = log.clone();
    let (level, targets) = match target {
        SuppressTarget::WholeMatch => {
            match bound.level() {
                SelectorLevel::Event => {
                    out.traces.par_iter_mut().try_for_each(|trace| -> Result<()> {
                        let keep = trace
                            .events
                            .iter()
                            .map(|e| bound.matches_event(trace, e).map(|m| !m))
                            .collect::<Result<Vec<bool>>>()?;
                        let mut flags = keep.into_iter();
                        trace.events.retain(|_| flags.next().unwrap_or(true));
                        Ok(())
                    })?;
                }
                SelectorLevel::Trace => {
                    let keep = out
                        .traces
                        .par_iter()
                        .map(|t| bound.matches_trace(t).map(|m| !m))
                        .collect::<Result<Vec<bool>>>()?;
                    let mut flags = keep.into_iter();
                    out.traces.retain(|_| flags.next().unwrap_or(true));
                }
            }
            let level = match bound.level() {
                SelectorLevel::Event => Level::Event,
                SelectorLevel::Trace => Level::Trace,
            };
            (level, bound.keys().collect::<BTreeSet<_>>())
        }
        SuppressTarget::Attributes(keys) => {
            let refs = keys
                .iter()
                .map(|k| log.resolve(k))
                .collect::<Result<Vec<_>>>()?;
            if bound.level() == SelectorLevel::Event {
                if let Some(r) = refs.iter().find(|r| matches!(r, AttrRef::Trace(_))) {
                    return Err(Error::InvalidOperation(format!(
                        "trace attribute `{}` cannot be suppressed by an event selector",
                        r.qualified()
                    )));
                }
            }
            out.traces.par_iter_mut().try_for_each(|trace| -> Result<()> {
                match bound.level() {
                    SelectorLevel::Event => {
                        let hits = trace
                            .events
                            .iter()
                            .map(|e| bound.matches_event(trace, e))
                            .collect::<Result<Vec<bool>>>()?;
                        for (event, hit) in trace.events.iter_mut().zip(hits) {
                            if hit {
                                for r in &refs {
                                    event.remove(r.key())?;
                                }
                            }
                        }
                    }
                    SelectorLevel::Trace => {
                        if bound.matches_trace(trace)? {
                            for r in &refs {
                                match r {
                                    AttrRef::Trace(k) => {
                                        trace.remove(k)?;
                                    }
                                    AttrRef::Event(k) => {
                                        for event in &mut trace.events {
                                            event.remove(k)?;
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
                Ok(())
            })?;
            for r in &refs {
                match r {
                    AttrRef::Event(k) => out.undeclare("event", k),
                    AttrRef::Trace(k) => out.undeclare("trace", k),
                }
            }
            (Level::Attribute, refs.iter().map(AttrRef::qualified).collect())
        }
    };
    let digest = parameter_digest(&[
        ("selector", selector.describe()),
        ("target", format!("{target:?}")),
    ]);
    out.privacy_metadata.push(RecordFields::new(
        OperationKind::Suppression,
        level,
        targets,
        digest,
        ctx,
    ));
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseGenerator {
    /// Copy an existing trace, shifted to a sampled start time.
    ReplayVariant,
    /// Walk the directly-follows graph from a sampled start activity.
    RandomWalk,
}

impl NoiseGenerator {
    pub fn parse(raw: &str) -> Option<NoiseGenerator> {
        match raw {
            "replay-variant" => Some(NoiseGenerator::ReplayVariant),
            "random-walk" => Some(NoiseGenerator::RandomWalk),
            _ => None,
        }
    }
}

struct WalkModel {
    starts: Vec<(String, u64)>,
    /// Successors of an activity; `None` ends the trace.
    next: BTreeMap<String, Vec<(Option<String>, u64)>>,
    resources: BTreeMap<String, Vec<String>>,
    max_len: usize,
}

impl WalkModel {
    fn new(log: &EventLog) -> Self {
        let dfg = df_graph(log);
        let mut next: BTreeMap<String, Vec<(Option<String>, u64)>> = BTreeMap::new();
        for ((a, b), n) in &dfg.pair_counts {
            next.entry(a.clone()).or_default().push((Some(b.clone()), *n));
        }
        for (a, n) in &dfg.end_counts {
            next.entry(a.clone()).or_default().push((None, *n));
        }
        let mut resources: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for event in log.events() {
            if let Some(r) = &event.resource {
                resources.entry(event.activity.clone()).or_default().push(r.clone());
            }
        }
        WalkModel {
            starts: dfg.start_counts.into_iter().collect(),
            next,
            resources,
            max_len: log.traces.iter().map(|t| t.events.len()).max().unwrap_or(0),
        }
    }

    fn walk<R: Rng>(&self, rng: &mut R) -> Vec<String> {
        let pick = |options: &[(Option<String>, u64)], rng: &mut R| -> Option<String> {
            let dist = WeightedIndex::new(options.iter().map(|(_, w)| *w)).ok()?;
            options[dist.sample(rng)].0.clone()
        };
        let starts: Vec<(Option<String>, u64)> = self
            .starts
            .iter()
            .map(|(a, n)| (Some(a.clone()), *n))
            .collect();
        let mut seq = Vec::new();
        let mut current = pick(&starts, rng);
        while let Some(activity) = current {
            seq.push(activity.clone());
            if seq.len() >= self.max_len {
                break;
            }
            current = self.next.get(&activity).and_then(|opts| pick(opts, rng));
        }
        seq
    }
}

/// Appends `count` synthetic traces drawn from the log's own behaviour.
///
/// Synthetic case ids start with `syn-`; nothing else marks them. The record
/// digests only the count.
pub fn add_noise(
    log: &EventLog,
    count: usize,
    generator: NoiseGenerator,
    seed: u64,
    ctx: &OpContext,
) -> Result<EventLog> {
    let mut out = log.clone();
    if count > 0 {
        let templates: Vec<&Trace> = log.traces.iter().filter(|t| !t.events.is_empty()).collect();
        if templates.is_empty() {
            return Err(Error::InvalidOperation(
                "cannot synthesize traces from a log without events".into(),
            ));
        }
        let timing = TimingModel::from_log(log);
        let walk = WalkModel::new(log);
        let synthetic: Vec<Trace> = (0..count)
            .into_par_iter()
            .map(|i| {
                let mut rng = stream_for(seed, &["add_noise", &i.to_string()]);
                let case_id = format!("syn-{:08x}", rng.random::<u32>());
                let start = timing.sample_start(&mut rng).expect("non-empty log has starts");
                let events = match generator {
                    NoiseGenerator::ReplayVariant => {
                        let source = templates.choose(&mut rng).expect("templates non-empty");
                        let shift = start - source.events[0].timestamp;
                        source
                            .events
                            .iter()
                            .map(|e| {
                                let mut e = e.clone();
                                e.timestamp += shift;
                                e
                            })
                            .collect()
                    }
                    NoiseGenerator::RandomWalk => {
                        let activities = walk.walk(&mut rng);
                        let stamps = timing.timestamps(&mut rng, start, &activities);
                        activities
                            .into_iter()
                            .zip(stamps)
                            .map(|(a, ts)| {
                                let mut event = crate::model::Event::new(a.clone(), ts);
                                event.resource = walk
                                    .resources
                                    .get(&a)
                                    .and_then(|rs| rs.choose(&mut rng))
                                    .cloned();
                                event
                            })
                            .collect()
                    }
                };
                Trace::new(case_id, events)
            })
            .collect();

        let mut taken: BTreeSet<String> = log.traces.iter().map(|t| t.case_id.clone()).collect();
        for mut trace in synthetic {
            let base = trace.case_id.clone();
            let mut n = 1;
            while taken.contains(&trace.case_id) {
                trace.case_id = format!("{base}-{n}");
                n += 1;
            }
            taken.insert(trace.case_id.clone());
            out.traces.push(trace);
        }
    }
    out.privacy_metadata.push(RecordFields::new(
        OperationKind::Addition,
        Level::Trace,
        Vec::<String>::new(),
        parameter_digest(&[("count", count.to_string())]),
        ctx,
    ));
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OnMissing {
    Keep,
    Error,
}

fn lookup_key(value: &TypedValue) -> (ValueKind, String) {
    (value.kind(), value.render().into_owned())
}

/// Replaces values of one attribute through an explicit mapping.
pub fn substitute(
    log: &EventLog,
    attribute: &str,
    mapping: &[(TypedValue, TypedValue)],
    on_missing: OnMissing,
    ctx: &OpContext,
) -> Result<EventLog> {
    let target = log.resolve(attribute)?;
    let mut table: HashMap<(ValueKind, String), &TypedValue> = HashMap::new();
    for (from, to) in mapping {
        if table.insert(lookup_key(from), to).is_some() {
            return Err(Error::InvalidOperation(format!(
                "value `{from}` is mapped twice"
            )));
        }
    }
    let mut out = log.clone();
    rewrite_values(&mut out, &target, |value| match table.get(&lookup_key(value)) {
        Some(to) => Ok(Some((*to).clone())),
        None => match on_missing {
            OnMissing::Keep => Ok(None),
            OnMissing::Error => Err(Error::UnknownValue(value.render().into_owned())),
        },
    })?;
    check_unique_cases(&out)?;

    let mut entries: Vec<String> = mapping
        .iter()
        .map(|(f, t)| format!("{}:{}->{}:{}", f.kind(), f, t.kind(), t))
        .collect();
    entries.sort();
    let digest = parameter_digest(&[
        ("attribute", target.qualified()),
        ("mapping", entries.join("\u{1f}")),
        ("on_missing", format!("{on_missing:?}")),
    ]);
    out.privacy_metadata.push(RecordFields::new(
        OperationKind::Substitution,
        level_of(&target),
        [target.qualified()],
        digest,
        ctx,
    ));
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CondenseGrouping {
    #[default]
    ByVariant,
}

#[derive(Debug, Default, Clone)]
struct GroupMean {
    n: i128,
    int_sum: i128,
    real_sum: f64,
    all_integer: bool,
}

impl GroupMean {
    fn add(&mut self, attribute: &AttrRef, value: &TypedValue) -> Result<()> {
        if self.n == 0 {
            self.all_integer = true;
        }
        match value {
            TypedValue::Integer(i) => {
                self.int_sum += *i as i128;
                self.real_sum += *i as f64;
            }
            TypedValue::Real(r) => {
                self.all_integer = false;
                self.real_sum += r;
            }
            other => {
                return Err(Error::type_mismatch(
                    &attribute.qualified(),
                    format!("condensation needs numeric values, found {}", other.kind()),
                ))
            }
        }
        self.n += 1;
        Ok(())
    }

    fn replace(&self, value: &TypedValue) -> Option<TypedValue> {
        if self.n == 0 {
            return None;
        }
        let mean = self.real_sum / self.n as f64;
        match value {
            TypedValue::Integer(_) if self.all_integer => {
                // exact round-half-up of int_sum / n
                let rounded = (2 * self.int_sum + self.n).div_euclid(2 * self.n);
                Some(TypedValue::Integer(rounded as i64))
            }
            TypedValue::Integer(_) => Some(TypedValue::Integer((mean + 0.5).floor() as i64)),
            TypedValue::Real(_) => Some(TypedValue::Real(mean)),
            _ => None,
        }
    }
}

/// Replaces a numeric attribute by its mean over each group of traces.
/// Integers receive the mean rounded half-up.
pub fn condense(
    log: &EventLog,
    attribute: &str,
    grouping: CondenseGrouping,
    ctx: &OpContext,
) -> Result<EventLog> {
    let target = log.resolve(attribute)?;
    let CondenseGrouping::ByVariant = grouping;

    let mut group_of_variant: BTreeMap<Vec<String>, usize> = BTreeMap::new();
    let trace_group: Vec<usize> = log
        .traces
        .iter()
        .map(|t| {
            let next = group_of_variant.len();
            *group_of_variant.entry(t.activities()).or_insert(next)
        })
        .collect();
    let mut means = vec![GroupMean::default(); group_of_variant.len()];
    for (trace, &g) in log.traces.iter().zip(&trace_group) {
        match &target {
            AttrRef::Event(key) => {
                for event in &trace.events {
                    if let Some(v) = event.get(key) {
                        means[g].add(&target, &v)?;
                    }
                }
            }
            AttrRef::Trace(key) => {
                if let Some(v) = trace.get(key) {
                    means[g].add(&target, &v)?;
                }
            }
        }
    }

    let mut out = log.clone();
    out.traces
        .par_iter_mut()
        .zip(trace_group.par_iter())
        .try_for_each(|(trace, &g)| -> Result<()> {
            let mean = &means[g];
            match &target {
                AttrRef::Event(key) => {
                    for event in &mut trace.events {
                        let new = event.get(key).and_then(|v| mean.replace(&v));
                        if let Some(new) = new {
                            event.set(key, new)?;
                        }
                    }
                }
                AttrRef::Trace(key) => {
                    let new = trace.get(key).and_then(|v| mean.replace(&v));
                    if let Some(new) = new {
                        trace.set(key, new)?;
                    }
                }
            }
            Ok(())
        })?;

    out.privacy_metadata.push(RecordFields::new(
        OperationKind::Condensation,
        level_of(&target),
        [target.qualified()],
        parameter_digest(&[("attribute", target.qualified()), ("grouping", "by-variant".into())]),
        ctx,
    ));
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SwapScope {
    WithinVariant,
    Global,
}

impl SwapScope {
    pub fn parse(raw: &str) -> Option<SwapScope> {
        match raw {
            "within-variant" => Some(SwapScope::WithinVariant),
            "global" => Some(SwapScope::Global),
            _ => None,
        }
    }
}

/// Permutes the values of an attribute uniformly at random within each scope.
pub fn swap(
    log: &EventLog,
    attribute: &str,
    scope: SwapScope,
    seed: u64,
    ctx: &OpContext,
) -> Result<EventLog> {
    let target = log.resolve(attribute)?;

    // (trace index, event index) of every value, grouped by scope label
    let mut groups: BTreeMap<String, Vec<(usize, Option<usize>)>> = BTreeMap::new();
    for (ti, trace) in log.traces.iter().enumerate() {
        let label = match scope {
            SwapScope::Global => String::new(),
            SwapScope::WithinVariant => trace.activities().join("\u{1f}"),
        };
        let slot = groups.entry(label).or_default();
        match &target {
            AttrRef::Event(key) => {
                for (ei, event) in trace.events.iter().enumerate() {
                    if event.get(key).is_some() {
                        slot.push((ti, Some(ei)));
                    }
                }
            }
            AttrRef::Trace(key) => {
                if trace.get(key).is_some() {
                    slot.push((ti, None));
                }
            }
        }
    }

    let read = |(ti, ei): (usize, Option<usize>)| -> TypedValue {
        let trace = &log.traces[ti];
        let value = match ei {
            Some(ei) => trace.events[ei].get(target.key()),
            None => trace.get(target.key()),
        };
        value.expect("position was collected from a present value").into_owned()
    };
    let assignments: Vec<((usize, Option<usize>), TypedValue)> = groups
        .into_par_iter()
        .flat_map_iter(|(label, positions)| {
            let mut values: Vec<TypedValue> = positions.iter().map(|&p| read(p)).collect();
            let mut rng = stream_for(seed, &["swap", &label]);
            values.shuffle(&mut rng);
            positions.into_iter().zip(values)
        })
        .collect();

    let mut out = log.clone();
    for ((ti, ei), value) in assignments {
        let trace = &mut out.traces[ti];
        match ei {
            Some(ei) => trace.events[ei].set(target.key(), value)?,
            None => trace.set(target.key(), value)?,
        }
    }
    sort_if_time(&mut out, &target);

    out.privacy_metadata.push(RecordFields::new(
        OperationKind::Swapping,
        level_of(&target),
        [target.qualified()],
        parameter_digest(&[
            ("attribute", target.qualified()),
            ("scope", format!("{scope:?}")),
            ("seed", seed.to_string()),
        ]),
        ctx,
    ));
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GeneralizationScheme {
    /// Replace each value by its parent (one level per call).
    Taxonomy(Taxonomy),
    /// Truncate datetime values.
    Timestamp(Granularity),
}

/// Coarsens an attribute by one taxonomy level or by timestamp truncation.
pub fn generalize(
    log: &EventLog,
    attribute: &str,
    scheme: &GeneralizationScheme,
    ctx: &OpContext,
) -> Result<EventLog> {
    let target = log.resolve(attribute)?;
    let name = target.qualified();
    let mut out = log.clone();
    rewrite_values(&mut out, &target, |value| match scheme {
        GeneralizationScheme::Timestamp(g) => match value {
            TypedValue::Datetime(ts) => Ok(Some(TypedValue::Datetime(g.truncate(*ts)))),
            other => Err(Error::type_mismatch(
                &name,
                format!("timestamp granularity needs datetime values, found {}", other.kind()),
            )),
        },
        GeneralizationScheme::Taxonomy(tax) => match value {
            TypedValue::String(s) => Ok(tax.parent(s).map(|p| TypedValue::String(p.to_owned()))),
            TypedValue::Id(s) => Ok(tax.parent(s).map(|p| TypedValue::Id(p.to_owned()))),
            other => Err(Error::type_mismatch(
                &name,
                format!("taxonomy generalization needs string values, found {}", other.kind()),
            )),
        },
    })?;
    check_unique_cases(&out)?;

    let scheme_desc = match scheme {
        GeneralizationScheme::Timestamp(g) => format!("granularity:{}", g.as_str()),
        GeneralizationScheme::Taxonomy(t) => {
            let edges: Vec<String> = t.edges().map(|(c, p)| format!("{c}>{p}")).collect();
            format!("taxonomy:{}", edges.join("\u{1f}"))
        }
    };
    out.privacy_metadata.push(RecordFields::new(
        OperationKind::Generalization,
        level_of(&target),
        [name.clone()],
        parameter_digest(&[("attribute", name), ("scheme", scheme_desc)]),
        ctx,
    ));
    Ok(out)
}
