//! Seeded random logs and matrices for property tests.

use chrono::Duration;
use pc4pm_core::model::{parse_timestamp, Event, EventLog, Trace, TypedValue};
use pc4pm_core::roles::ResourceActivityMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Shape {
    pub max_traces: usize,
    pub max_len: usize,
    pub activities: usize,
    pub resources: usize,
}

pub const SMALL: Shape = Shape { max_traces: 8, max_len: 6, activities: 6, resources: 3 };

pub fn label(i: usize) -> String {
    // outside the hex alphabet so encoded bodies cannot contain them by chance
    ["pay", "ship", "quote", "reject", "invoice", "order", "return", "audit", "login", "notify"][i % 10].to_string()
}

/// Random log: activities, resources, an integer `cost`, a string `region`,
/// a trace attribute `segment`, strictly increasing minute timestamps with
/// occasional ties.
pub fn random_log(seed: u64, shape: &Shape) -> EventLog {
    let n = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed).random_range(1..=shape.max_traces);
    log_with_traces(seed, n, shape)
}

pub fn log_with_traces(seed: u64, n: usize, shape: &Shape) -> EventLog {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = parse_timestamp("2023-03-01T08:00:00Z").unwrap();
    let traces = (0..n)
        .map(|t| {
            let len = rng.random_range(1..=shape.max_len);
            let mut ts = start + Duration::minutes(rng.random_range(0..600));
            let events = (0..len)
                .map(|_| {
                    if rng.random_bool(0.8) {
                        ts += Duration::minutes(rng.random_range(1..90));
                    }
                    let a = rng.random_range(0..shape.activities);
                    Event::new(label(a), ts)
                        .with_resource(format!("r{}", rng.random_range(0..shape.resources.max(1))))
                        .with_attribute("cost", TypedValue::Integer(rng.random_range(0..500)))
                        .with_attribute("region", TypedValue::string(["north", "south", "east"][rng.random_range(0..3)]))
                })
                .collect();
            Trace::new(format!("case-{t}"), events)
                .with_attribute("segment", TypedValue::string(["retail", "b2b"][rng.random_range(0..2)]))
        })
        .collect();
    EventLog::new(traces)
}

/// Random resource-activity count matrix with at least one nonzero per row.
pub fn random_matrix(seed: u64) -> ResourceActivityMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = rng.random_range(1..=8);
    let a = rng.random_range(1..=8);
    let counts = (0..r)
        .map(|_| {
            let mut row: Vec<u64> =
                (0..a).map(|_| if rng.random_bool(0.4) { rng.random_range(1..40) } else { 0 }).collect();
            if row.iter().all(|c| *c == 0) {
                row[rng.random_range(0..a)] = rng.random_range(1..40);
            }
            row
        })
        .collect();
    ResourceActivityMatrix {
        resources: (0..r).map(|i| format!("res{i}")).collect(),
        activities: (0..a).map(label).collect(),
        counts,
    }
}
