//! The seven anonymization operations. Each is a pure `log -> log`
//! transformation that appends exactly one operation record.

mod crypto;
mod ops;
mod selector;
mod taxonomy;

pub use crypto::{de_pseudonymize, pseudonymize, KeyMode, KeySpec, MIN_SECRET_LEN, TOKEN_LEN};
pub use ops::{
    add_noise, condense, generalize, substitute, suppress, swap, CondenseGrouping,
    GeneralizationScheme, NoiseGenerator, OnMissing, SuppressTarget, SwapScope,
};
pub use selector::{Atom, Comparator, Selector, SelectorLevel};
pub use taxonomy::Taxonomy;

use std::collections::BTreeSet;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{AttrRef, EventLog, TypedValue, TIMESTAMP_KEY};

/// All values of an attribute, in log order.
pub(crate) fn collect_values(log: &EventLog, target: &AttrRef) -> Vec<TypedValue> {
    match target {
        AttrRef::Event(key) => log
            .events()
            .filter_map(|e| e.get(key).map(|v| v.into_owned()))
            .collect(),
        AttrRef::Trace(key) => log
            .traces
            .iter()
            .filter_map(|t| t.get(key).map(|v| v.into_owned()))
            .collect(),
    }
}

/// Rewrites every occurrence of an attribute in place. `f` returns `None` to
/// keep a value. Traces are processed in parallel.
pub(crate) fn rewrite_values<F>(log: &mut EventLog, target: &AttrRef, f: F) -> Result<()>
where
    F: Fn(&TypedValue) -> Result<Option<TypedValue>> + Sync,
{
    log.traces.par_iter_mut().try_for_each(|trace| -> Result<()> {
        match target {
            AttrRef::Event(key) => {
                for event in &mut trace.events {
                    let replacement = match event.get(key) {
                        Some(value) => f(&value)?,
                        None => None,
                    };
                    if let Some(new) = replacement {
                        event.set(key, new)?;
                    }
                }
            }
            AttrRef::Trace(key) => {
                let replacement = match trace.get(key) {
                    Some(value) => f(&value)?,
                    None => None,
                };
                if let Some(new) = replacement {
                    trace.set(key, new)?;
                }
            }
        }
        Ok(())
    })?;
    sort_if_time(log, target);
    Ok(())
}

/// Re-establishes time order when timestamps were rewritten.
pub(crate) fn sort_if_time(log: &mut EventLog, target: &AttrRef) {
    if *target == AttrRef::Event(TIMESTAMP_KEY.to_owned()) {
        log.traces.par_iter_mut().for_each(|t| t.sort_events());
    }
}

pub(crate) fn check_unique_cases(log: &EventLog) -> Result<()> {
    let mut seen = BTreeSet::new();
    for trace in &log.traces {
        if !seen.insert(trace.case_id.as_str()) {
            return Err(Error::InvalidOperation(format!(
                "operation would produce duplicate case id `{}`",
                trace.case_id
            )));
        }
    }
    Ok(())
}
