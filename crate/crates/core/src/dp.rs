//! Differentially private log publishing: Laplace noise on trace-variant
//! counts, then reconstruction of concrete traces with resampled timing.

use std::collections::BTreeSet;

use chrono::DateTime;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, ParamError, Result};
use crate::metadata::{parameter_digest, Level, OpContext, OperationKind, RecordFields};
use crate::model::{Event, EventLog, Trace, ACTIVITY_KEY, TIMESTAMP_KEY};
use crate::rng::stream_for;
use crate::stats::{variants, VariantCounts};
use crate::timing::TimingModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpParams {
    pub epsilon: f64,
    #[serde(default)]
    pub prune_threshold: f64,
    pub max_variant_length: usize,
    #[serde(default)]
    pub seed: u64,
    /// Draw noise from the operating system instead of the seeded stream.
    #[serde(default)]
    pub secure_random: bool,
}

impl DpParams {
    pub fn new(epsilon: f64, seed: u64) -> Self {
        DpParams {
            epsilon,
            prune_threshold: 0.0,
            max_variant_length: 64,
            seed,
            secure_random: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epsilon <= 0.0 || !self.epsilon.is_finite() {
            return Err(Error::InvalidEpsilon(self.epsilon));
        }
        let mut errors = Vec::new();
        if self.prune_threshold < 0.0 || !self.prune_threshold.is_finite() {
            errors.push(ParamError::new("prune_threshold", "must be a non-negative number"));
        }
        if self.max_variant_length < 1 {
            errors.push(ParamError::new("max_variant_length", "must be at least 1"));
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::ParameterValidation(errors))
        }
    }
}

/// Inverse CDF of Laplace(0, scale) at `u` in (-1/2, 1/2).
pub fn laplace_inverse_cdf(u: f64, scale: f64) -> f64 {
    -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

pub fn laplace_cdf(x: f64, scale: f64) -> f64 {
    if x < 0.0 {
        0.5 * (x / scale).exp()
    } else {
        1.0 - 0.5 * (-x / scale).exp()
    }
}

pub fn sample_laplace<R: Rng + ?Sized>(rng: &mut R, scale: f64) -> f64 {
    loop {
        let u: f64 = rng.random::<f64>() - 0.5;
        if u > -0.5 {
            return laplace_inverse_cdf(u, scale);
        }
    }
}

fn variant_label(variant: &[String]) -> String {
    variant.join("\u{1f}")
}

/// Adds Laplace(1/ε) noise to every observed variant count, rounds half away
/// from zero and clamps at zero, then drops counts below the prune threshold
/// and zero counts. Variants longer than `max_variant_length` are truncated
/// first, merging counts of variants that share the truncated prefix.
pub fn dp_variant_counts(counts: &VariantCounts, params: &DpParams) -> Result<VariantCounts> {
    params.validate()?;
    let mut truncated = VariantCounts::new();
    for (variant, n) in counts {
        let cut = variant.len().min(params.max_variant_length);
        *truncated.entry(variant[..cut].to_vec()).or_insert(0) += n;
    }
    let scale = 1.0 / params.epsilon;
    let noisy: Vec<(Vec<String>, f64)> = truncated
        .into_par_iter()
        .map(|(variant, n)| {
            let noise = if params.secure_random {
                sample_laplace(&mut rand::rng(), scale)
            } else {
                let mut rng = stream_for(params.seed, &["dp-noise", &variant_label(&variant)]);
                sample_laplace(&mut rng, scale)
            };
            let value = (n as f64 + noise).round().max(0.0);
            (variant, value)
        })
        .collect();
    Ok(noisy
        .into_iter()
        .filter(|(_, value)| *value >= params.prune_threshold && *value >= 1.0)
        .map(|(variant, value)| (variant, value as u64))
        .collect())
}

/// Emits `n` traces per noisy variant. Case ids are `dp-<index>`; start times
/// and per-pair delays are drawn from the original log. Only activities and
/// timestamps are produced, so event globals are cleared; the original's
/// privacy metadata is carried over.
pub fn reconstruct_log(original: &EventLog, noisy: &VariantCounts, seed: u64) -> Result<EventLog> {
    let alphabet = original.alphabet();
    for variant in noisy.keys() {
        if let Some(a) = variant.iter().find(|a| !alphabet.contains(*a)) {
            return Err(Error::UnknownVariantSymbol(a.clone()));
        }
    }
    let timing = TimingModel::from_log(original);
    let jobs: Vec<&Vec<String>> = noisy
        .iter()
        .flat_map(|(variant, n)| std::iter::repeat_n(variant, *n as usize))
        .collect();
    let traces: Vec<Trace> = jobs
        .into_par_iter()
        .enumerate()
        .map(|(i, variant)| {
            let case_id = format!("dp-{}", i + 1);
            let mut rng = stream_for(seed, &["dp-reconstruct", &case_id]);
            let start = timing.sample_start(&mut rng).unwrap_or(DateTime::UNIX_EPOCH);
            let stamps = timing.timestamps(&mut rng, start, variant);
            let events = variant
                .iter()
                .zip(stamps)
                .map(|(a, ts)| Event::new(a.clone(), ts))
                .collect();
            Trace::new(case_id, events)
        })
        .collect();
    Ok(EventLog {
        attributes: original.attributes.clone(),
        extensions: original.extensions.clone(),
        classifiers: original.classifiers.clone(),
        globals: Default::default(),
        traces,
        privacy_metadata: original.privacy_metadata.clone(),
    })
}

/// Noisy variant counts of `log` turned back into a log, with one addition
/// record at log level.
pub fn dp_publish(log: &EventLog, params: &DpParams, ctx: &OpContext) -> Result<EventLog> {
    let noisy = dp_variant_counts(&variants(log), params)?;
    let mut out = reconstruct_log(log, &noisy, params.seed)?;
    out.privacy_metadata.push(RecordFields::new(
        OperationKind::Addition,
        Level::Log,
        BTreeSet::from([ACTIVITY_KEY.to_owned(), TIMESTAMP_KEY.to_owned()]),
        parameter_digest(&[
            ("epsilon", params.epsilon.to_string()),
            ("prune_threshold", params.prune_threshold.to_string()),
            ("max_variant_length", params.max_variant_length.to_string()),
            ("seed", params.seed.to_string()),
            ("secure_random", params.secure_random.to_string()),
        ]),
        ctx,
    ));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::fix1;
    use crate::model::parse_timestamp;
    use crate::rng::stream;

    fn ctx() -> OpContext {
        OpContext::at(parse_timestamp("2021-07-01T00:00:00Z").unwrap())
    }

    fn v(items: &[&str]) -> Vec<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn rejects_non_positive_epsilon() {
        let counts = variants(&fix1());
        for eps in [0.0, -1.0, f64::NAN] {
            assert!(matches!(
                dp_variant_counts(&counts, &DpParams::new(eps, 1)),
                Err(Error::InvalidEpsilon(_))
            ));
            assert!(matches!(dp_publish(&fix1(), &DpParams::new(eps, 1), &ctx()), Err(Error::InvalidEpsilon(_))));
        }
    }

    #[test]
    fn inverse_cdf_inverts_cdf() {
        for u in [-0.49, -0.2, 0.0, 0.1, 0.45] {
            let x = laplace_inverse_cdf(u, 2.0);
            assert!((laplace_cdf(x, 2.0) - (u + 0.5)).abs() < 1e-12);
        }
    }

    #[test]
    fn noise_moments() {
        let mut rng = stream(42, b"moments");
        let n = 10_000;
        let draws: Vec<f64> = (0..n).map(|_| sample_laplace(&mut rng, 1.0)).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let mad = draws.iter().map(|x| x.abs()).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.05, "mean {mean}");
        assert!((mad - 1.0).abs() < 0.05, "mad {mad}");
    }

    #[test]
    fn pruning_drops_small_counts() {
        let counts = VariantCounts::from([(v(&["a"]), 3)]);
        let mut p = DpParams::new(1e6, 1);
        p.prune_threshold = 5.0;
        assert!(dp_variant_counts(&counts, &p).unwrap().is_empty());
        p.prune_threshold = 0.0;
        assert_eq!(dp_variant_counts(&counts, &p).unwrap(), counts);
    }

    #[test]
    fn long_variants_are_truncated_and_merged() {
        let counts = VariantCounts::from([(v(&["a", "b", "c"]), 2), (v(&["a", "b", "d"]), 1)]);
        let mut p = DpParams::new(1e6, 1);
        p.max_variant_length = 2;
        assert_eq!(dp_variant_counts(&counts, &p).unwrap(), VariantCounts::from([(v(&["a", "b"]), 3)]));
    }

    #[test]
    fn reconstruct_true_counts() {
        let log = fix1();
        let truth = variants(&log);
        let out = reconstruct_log(&log, &truth, 3).unwrap();
        assert_eq!(out.traces.len(), 3);
        assert_eq!(variants(&out), truth);
        out.validate().unwrap();
        assert_eq!(out, reconstruct_log(&log, &truth, 3).unwrap());
        assert!(reconstruct_log(&log, &VariantCounts::new(), 3).unwrap().traces.is_empty());
        // hourly delays everywhere in FIX1
        let t = &out.traces[0];
        assert_eq!((t.events[1].timestamp - t.events[0].timestamp).num_hours(), 1);
    }

    #[test]
    fn reconstruct_rejects_foreign_activities() {
        let noisy = VariantCounts::from([(v(&["a", "z"]), 1)]);
        assert!(matches!(
            reconstruct_log(&fix1(), &noisy, 0),
            Err(Error::UnknownVariantSymbol(a)) if a == "z"
        ));
    }

    #[test]
    fn huge_epsilon_keeps_counts() {
        let out = dp_publish(&fix1(), &DpParams::new(1e6, 9), &ctx()).unwrap();
        assert_eq!(variants(&out), variants(&fix1()));
        let rec = &out.privacy_metadata.records[0];
        assert_eq!((rec.operation_kind, rec.level), (OperationKind::Addition, Level::Log));
    }

    #[test]
    fn strict_pruning_empties_the_log() {
        let mut p = DpParams::new(1e6, 9);
        p.prune_threshold = 10.0;
        assert!(dp_publish(&fix1(), &p, &ctx()).unwrap().traces.is_empty());
    }
}
