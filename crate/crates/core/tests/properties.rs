mod common;

use std::collections::{BTreeMap, BTreeSet};

use common::gen::{random_log, random_matrix, Shape, SMALL};
use pc4pm_core::analysis::{df_distance, disclosure_risk};
use pc4pm_core::anon::{generalize, suppress, swap, Atom, Comparator, GeneralizationScheme, Selector, SuppressTarget, SwapScope};
use pc4pm_core::group_privacy::{enforce, TlkcParams};
use pc4pm_core::knowledge::KnowledgeKind;
use pc4pm_core::metadata::OpContext;
use pc4pm_core::model::{Event, EventLog, Granularity, Trace, TypedValue};
use pc4pm_core::roles::{mine_roles, perturb_matrix};
use pc4pm_core::stats::{df_graph, variants};
use pc4pm_core::Error;
use proptest::prelude::*;

const MEDIUM: Shape = Shape { max_traces: 12, max_len: 8, activities: 5, resources: 3 };

fn ctx() -> OpContext {
    OpContext::at(chrono::DateTime::UNIX_EPOCH)
}

fn is_subsequence<T: PartialEq>(sub: &[T], full: &[T]) -> bool {
    let mut it = full.iter();
    sub.iter().all(|x| it.any(|y| y == x))
}

fn rendered(v: Option<std::borrow::Cow<'_, TypedValue>>) -> String {
    v.map(|v| format!("{}:{}", v.kind(), v)).unwrap_or_default()
}

/// Values of `key` grouped by scope key, each group sorted.
fn event_multisets(log: &EventLog, key: &str, by_variant: bool) -> BTreeMap<Vec<String>, Vec<String>> {
    let mut out: BTreeMap<Vec<String>, Vec<String>> = BTreeMap::new();
    for t in &log.traces {
        let scope = if by_variant { t.activities() } else { vec![] };
        out.entry(scope).or_default().extend(t.events.iter().map(|e| rendered(e.get(key))));
    }
    out.values_mut().for_each(|v| v.sort());
    out
}

fn trace_multisets(log: &EventLog, key: &str, by_variant: bool) -> BTreeMap<Vec<String>, Vec<String>> {
    let mut out: BTreeMap<Vec<String>, Vec<String>> = BTreeMap::new();
    for t in &log.traces {
        let scope = if by_variant { t.activities() } else { vec![] };
        out.entry(scope).or_default().push(rendered(t.get(key)));
    }
    out.values_mut().for_each(|v| v.sort());
    out
}

fn selector_for(choice: u8, pivot: i64) -> Selector {
    match choice % 4 {
        0 => Selector::events(vec![Atom::new("cost", Comparator::Lt, TypedValue::Integer(pivot))]),
        1 => Selector::events(vec![Atom::in_set(
            "concept:name",
            vec![TypedValue::string("pay"), TypedValue::string("quote")],
        )]),
        2 => Selector::traces(vec![Atom::eq("case:segment", TypedValue::string("b2b"))]),
        _ => Selector::traces(vec![Atom::new("cost", Comparator::Ge, TypedValue::Integer(pivot))]),
    }
}

fn granularity(i: u8) -> Granularity {
    [Granularity::Year, Granularity::Month, Granularity::Day, Granularity::Hour, Granularity::Minute][i as usize % 5]
}

fn by_case(log: &EventLog) -> BTreeMap<&str, &Trace> {
    log.traces.iter().map(|t| (t.case_id.as_str(), t)).collect()
}

fn suppressed_activities(log: &EventLog, params: &TlkcParams, kind: KnowledgeKind) -> BTreeSet<String> {
    match enforce(log, params, kind, 0, &ctx()) {
        Ok(out) => log.alphabet().difference(&out.alphabet()).cloned().collect(),
        Err(Error::EmptyResult) => log.alphabet(),
        Err(e) => panic!("{e}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn swap_preserves_value_multisets(seed in any::<u64>(), swap_seed in any::<u64>(), global in any::<bool>(), attr in 0u8..3) {
        let log = random_log(seed, &MEDIUM);
        let scope = if global { SwapScope::Global } else { SwapScope::WithinVariant };
        let key = ["cost", "region", "case:segment"][attr as usize];
        let out = swap(&log, key, scope, swap_seed, &ctx()).unwrap();
        prop_assert_eq!(out.traces.len(), log.traces.len());
        prop_assert_eq!(out.event_count(), log.event_count());
        prop_assert_eq!(out.privacy_metadata.len(), log.privacy_metadata.len() + 1);
        if attr == 2 {
            prop_assert_eq!(trace_multisets(&out, "segment", !global), trace_multisets(&log, "segment", !global));
        } else {
            prop_assert_eq!(event_multisets(&out, key, !global), event_multisets(&log, key, !global));
        }
        for (a, b) in log.traces.iter().zip(&out.traces) {
            prop_assert_eq!(a.activities(), b.activities());
        }
        prop_assert_eq!(swap(&log, key, scope, swap_seed, &ctx()).unwrap(), out);
    }

    #[test]
    fn suppress_is_subsequence_monotone(seed in any::<u64>(), choice in any::<u8>(), pivot in 0i64..500) {
        let log = random_log(seed, &MEDIUM);
        let out = suppress(&log, &selector_for(choice, pivot), &SuppressTarget::WholeMatch, &ctx()).unwrap();
        prop_assert!(out.event_count() <= log.event_count());
        let ids = |l: &EventLog| l.traces.iter().map(|t| t.case_id.clone()).collect::<Vec<_>>();
        prop_assert!(is_subsequence(&ids(&out), &ids(&log)));
        let original = by_case(&log);
        for t in &out.traces {
            let events: &[Event] = &original[t.case_id.as_str()].events;
            prop_assert!(is_subsequence(&t.events, events));
        }
        prop_assert_eq!(out.privacy_metadata.len(), 1);
    }

    #[test]
    fn suppress_attributes_keeps_structure(seed in any::<u64>(), pivot in 0i64..500) {
        let log = random_log(seed, &MEDIUM);
        let sel = Selector::events(vec![Atom::new("cost", Comparator::Lt, TypedValue::Integer(pivot))]);
        let out = suppress(&log, &sel, &SuppressTarget::Attributes(vec!["region".into()]), &ctx()).unwrap();
        prop_assert_eq!(out.event_count(), log.event_count());
        for (a, b) in log.traces.iter().zip(&out.traces) {
            for (ea, eb) in a.events.iter().zip(&b.events) {
                let hit = matches!(ea.get("cost").as_deref(), Some(TypedValue::Integer(c)) if *c < pivot);
                prop_assert_eq!(eb.get("region").is_none(), hit);
                prop_assert_eq!(&ea.activity, &eb.activity);
            }
        }
    }

    #[test]
    fn generalize_preserves_in_trace_order(seed in any::<u64>(), g in any::<u8>()) {
        let log = random_log(seed, &MEDIUM);
        let g = granularity(g);
        let out = generalize(&log, "time:timestamp", &GeneralizationScheme::Timestamp(g), &ctx()).unwrap();
        prop_assert_eq!(out.traces.len(), log.traces.len());
        for (a, b) in log.traces.iter().zip(&out.traces) {
            prop_assert_eq!(a.events.len(), b.events.len());
            for (ea, eb) in a.events.iter().zip(&b.events) {
                prop_assert_eq!(&ea.activity, &eb.activity);
                prop_assert_eq!(eb.timestamp, g.truncate(ea.timestamp));
                prop_assert_eq!(ea.get("cost"), eb.get("cost"));
            }
            prop_assert!(b.events.windows(2).all(|w| w[0].timestamp <= w[1].timestamp));
        }
    }

    #[test]
    fn df_distance_is_a_bounded_pseudometric(x in any::<u64>(), y in any::<u64>(), z in any::<u64>()) {
        let (a, b, c) = (df_graph(&random_log(x, &SMALL)), df_graph(&random_log(y, &SMALL)), df_graph(&random_log(z, &SMALL)));
        prop_assert_eq!(df_distance(&a, &a), 0.0);
        prop_assert_eq!(df_distance(&a, &b), df_distance(&b, &a));
        let d = df_distance(&a, &b);
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert!(d <= df_distance(&a, &c) + df_distance(&c, &b) + 1e-12);
    }

    #[test]
    fn risk_grows_with_knowledge_size(seed in any::<u64>(), k in 0usize..3) {
        let log = random_log(seed, &SMALL);
        let kind = KnowledgeKind::ALL[k];
        let mut prev = disclosure_risk(&log, kind, 1).unwrap();
        for l in 2..=4 {
            let next = disclosure_risk(&log, kind, l).unwrap();
            prop_assert!(next.uniqueness_rate >= prev.uniqueness_rate);
            prop_assert!(next.avg_reid_probability >= prev.avg_reid_probability - 1e-12);
            for (case, g) in &next.per_case_min_group {
                prop_assert!(*g <= prev.per_case_min_group[case]);
            }
            prev = next;
        }
    }

    #[test]
    fn suppressed_activities_grow_with_k(seed in any::<u64>(), l in 1usize..3, k in 0usize..3) {
        let log = random_log(seed, &Shape { max_traces: 8, max_len: 5, activities: 5, resources: 2 });
        let kind = KnowledgeKind::ALL[k];
        let mut prev = BTreeSet::new();
        for big_k in 1..=4 {
            let now = suppressed_activities(&log, &TlkcParams::new(l, big_k), kind);
            prop_assert!(prev.is_subset(&now), "K={} removed {:?}, K-1 removed {:?}", big_k, now, prev);
            prev = now;
        }
    }

    #[test]
    fn enforcement_lifts_every_group_to_k(seed in any::<u64>(), l in 1usize..3, k in 2usize..4, kind in 0usize..3) {
        let log = random_log(seed, &SMALL);
        let kind = KnowledgeKind::ALL[kind];
        if let Ok(out) = enforce(&log, &TlkcParams::new(l, k), kind, 0, &ctx()) {
            let removed = log.alphabet().len() - out.alphabet().len();
            prop_assert_eq!(out.privacy_metadata.len(), removed);
            let risk = disclosure_risk(&out, kind, l).unwrap();
            for t in &out.traces {
                prop_assert!(risk.per_case_min_group[&t.case_id] >= k);
            }
        }
    }

    #[test]
    fn perturbation_never_changes_roles(seed in any::<u64>(), s in any::<u64>(), b in 1u64..60, theta in 0.0f64..=1.0) {
        let m = random_matrix(seed);
        let p = perturb_matrix(&m, b, s).unwrap();
        for (row_m, row_p) in m.counts.iter().zip(&p.counts) {
            for (cm, cp) in row_m.iter().zip(row_p) {
                prop_assert_eq!(*cm == 0, *cp == 0);
                prop_assert!(cp.abs_diff(*cm) <= b || (*cp == 1 && *cm <= b));
            }
        }
        let roles = mine_roles(&m, theta).unwrap();
        prop_assert_eq!(mine_roles(&p, theta).unwrap(), roles.clone());
        let mut members: Vec<String> = roles.roles.iter().flat_map(|r| r.members.iter().cloned()).collect();
        members.sort();
        let mut expected = m.resources.clone();
        expected.sort();
        prop_assert_eq!(members, expected);
    }

    #[test]
    fn variant_totals_match(seed in any::<u64>()) {
        let log = random_log(seed, &MEDIUM);
        prop_assert_eq!(variants(&log).values().sum::<u64>() as usize, log.traces.len());
        let g = df_graph(&log);
        let starts: u64 = g.start_counts.values().sum();
        let ends: u64 = g.end_counts.values().sum();
        prop_assert_eq!(starts, ends);
        prop_assert_eq!(starts as usize, log.traces.iter().filter(|t| !t.events.is_empty()).count());
    }
}
