//! Empirical timing model used when synthesizing traces.

use std::collections::BTreeMap;

use chrono::Duration;
use rand::seq::IndexedRandom;
use rand::Rng;

use crate::model::{EventLog, Timestamp};

/// Observed start times and per-pair inter-event delays of a log.
#[derive(Debug, Clone, Default)]
pub struct TimingModel {
    start_times: Vec<Timestamp>,
    pair_delays: BTreeMap<(String, String), Vec<i64>>,
    fallback_delay_ms: i64,
}

impl TimingModel {
    pub fn from_log(log: &EventLog) -> Self {
        let mut model = TimingModel::default();
        let mut all = Vec::new();
        for trace in &log.traces {
            if let Some(first) = trace.events.first() {
                model.start_times.push(first.timestamp);
            }
            for pair in trace.events.windows(2) {
                let delay = (pair[1].timestamp - pair[0].timestamp).num_milliseconds();
                model
                    .pair_delays
                    .entry((pair[0].activity.clone(), pair[1].activity.clone()))
                    .or_default()
                    .push(delay);
                all.push(delay);
            }
        }
        all.sort_unstable();
        // lower median
        model.fallback_delay_ms = all.get(all.len().saturating_sub(1) / 2).copied().unwrap_or(0);
        model
    }

    pub fn fallback_delay_ms(&self) -> i64 {
        self.fallback_delay_ms
    }

    pub fn has_starts(&self) -> bool {
        !self.start_times.is_empty()
    }

    pub fn sample_start<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<Timestamp> {
        self.start_times.choose(rng).copied()
    }

    /// Uniform draw from the delays observed between `from` and `to`, or the
    /// median of all observed delays when the pair never occurs.
    pub fn sample_delay_ms<R: Rng + ?Sized>(&self, rng: &mut R, from: &str, to: &str) -> i64 {
        self.pair_delays
            .get(&(from.to_owned(), to.to_owned()))
            .and_then(|d| d.choose(rng).copied())
            .unwrap_or(self.fallback_delay_ms)
    }

    /// Timestamps for an activity sequence starting at `start`. Non-decreasing.
    pub fn timestamps<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        start: Timestamp,
        activities: &[String],
    ) -> Vec<Timestamp> {
        let mut out = Vec::with_capacity(activities.len());
        let mut now = start;
        for (i, activity) in activities.iter().enumerate() {
            if i > 0 {
                let delay = self.sample_delay_ms(rng, &activities[i - 1], activity).max(0);
                now += Duration::milliseconds(delay);
            }
            out.push(now);
        }
        out
    }
}
