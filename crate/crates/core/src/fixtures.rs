//! Small hand-built logs shared by tests, examples and the CLI demo.

use chrono::Duration;

use crate::model::{parse_timestamp, Event, EventLog, Trace};

fn resource_of(activity: &str) -> &'static str {
    match activity {
        "a" => "r1",
        "b" | "c" => "r2",
        _ => "r3",
    }
}

/// Builds a trace whose events start at 2021-06-10T10:00:00Z and follow hourly.
pub fn hourly_trace(case_id: &str, activities: &[&str]) -> Trace {
    let start = parse_timestamp("2021-06-10T10:00:00Z").expect("valid literal");
    let events = activities
        .iter()
        .enumerate()
        .map(|(i, a)| {
            Event::new(*a, start + Duration::hours(i as i64)).with_resource(resource_of(a))
        })
        .collect();
    Trace::new(case_id, events)
}

/// Three cases: c1 and c2 run a,b,c and c3 runs a,d. Resource r1 performs a,
/// r2 performs b and c, r3 performs d.
pub fn fix1() -> EventLog {
    EventLog::new(vec![
        hourly_trace("c1", &["a", "b", "c"]),
        hourly_trace("c2", &["a", "b", "c"]),
        hourly_trace("c3", &["a", "d"]),
    ])
}
