//! IEEE 1849-2016 XES reading and canonical writing.
//!
//! Privacy metadata travels inside the log as a nested container attribute
//! keyed `privacy:metadata`, one child container per operation record, so any
//! XES-compliant tool carries it along untouched.

mod reader;
mod writer;

pub use reader::parse_xes;
pub use writer::write_xes;

pub const METADATA_KEY: &str = "privacy:metadata";

/// Content address of a log's canonical serialization.
pub fn log_id(log: &crate::model::EventLog) -> String {
    crate::metadata::content_id(&write_xes(log))
}
