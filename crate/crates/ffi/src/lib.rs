//! C ABI over pc4pm-core.
//!
//! Logs and abstractions cross the boundary as opaque handles. Every fallible
//! call returns a `Pc4pmStatus`; on failure `pc4pm_last_error` describes the
//! most recent error on the calling thread. Byte results come back in a
//! `Pc4pmBuffer` that the caller releases with `pc4pm_buffer_free`.

use std::cell::RefCell;
use std::collections::BTreeSet;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use pc4pm_core::analysis::{data_utility, disclosure_risk};
use pc4pm_core::anon::{suppress, KeyMode, KeySpec, SuppressTarget};
use pc4pm_core::connector;
use pc4pm_core::dp::{dp_publish, DpParams};
use pc4pm_core::ela::{parse_ela, write_ela, EventLogAbstraction};
use pc4pm_core::group_privacy::{enforce, TlkcParams};
use pc4pm_core::guidance::{self, GuideQuery};
use pc4pm_core::knowledge::KnowledgeKind;
use pc4pm_core::metadata::OpContext;
use pc4pm_core::model::EventLog;
use pc4pm_core::repo::selector_from_json;
use pc4pm_core::xes::{parse_xes, write_xes};
use pc4pm_core::Error;

/// Status codes. Zero is success.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pc4pmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    InvalidArgument = 4,
    UnknownAttribute = 5,
    TypeMismatch = 6,
    InvalidKey = 7,
    Crypto = 8,
    EmptyResult = 9,
    InvalidEpsilon = 10,
    Unresolved = 11,
    NoResources = 12,
    Io = 13,
    Panic = 99,
}

impl From<&Error> for Pc4pmStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::MalformedXml { .. }
            | Error::SchemaViolation { .. }
            | Error::MalformedAbstraction(_)
            | Error::ParseFailure { .. } => Pc4pmStatus::Parse,
            Error::UnknownAttribute(_) | Error::UnknownValue(_) => Pc4pmStatus::UnknownAttribute,
            Error::TypeMismatch { .. } => Pc4pmStatus::TypeMismatch,
            Error::InvalidKey(_) => Pc4pmStatus::InvalidKey,
            Error::PseudonymCollision { .. } | Error::Decryption(_) | Error::ReservedSymbolClash(_) => {
                Pc4pmStatus::Crypto
            }
            Error::EmptyResult => Pc4pmStatus::EmptyResult,
            Error::InvalidEpsilon(_) => Pc4pmStatus::InvalidEpsilon,
            Error::UnresolvedToken(_) | Error::UnknownVariantSymbol(_) => Pc4pmStatus::Unresolved,
            Error::NoResources => Pc4pmStatus::NoResources,
            Error::Io(_) => Pc4pmStatus::Io,
            _ => Pc4pmStatus::InvalidArgument,
        }
    }
}

/// Opaque event log.
pub struct Pc4pmLog {
    log: EventLog,
}

/// Opaque event-log abstraction.
pub struct Pc4pmAbstraction {
    ela: EventLogAbstraction,
}

/// Rust-owned bytes. Release with `pc4pm_buffer_free`.
#[repr(C)]
pub struct Pc4pmBuffer {
    pub data: *mut u8,
    pub len: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct Pc4pmRisk {
    pub uniqueness_rate: f64,
    pub avg_reid_probability: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct Pc4pmUtility {
    pub variant_preservation: f64,
    pub df_distance: f64,
    pub event_count_ratio: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Fail(Pc4pmStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(Pc4pmStatus::from(&e), e.to_string())
    }
}

type Outcome = Result<(), Fail>;

fn guard(f: impl FnOnce() -> Outcome) -> Pc4pmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => Pc4pmStatus::Ok,
        Ok(Err(Fail(status, message))) => {
            set_last_error(message);
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            Pc4pmStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(Pc4pmStatus::NullPointer, format!("`{what}` is null"))
}

fn invalid(message: impl Into<String>) -> Fail {
    Fail(Pc4pmStatus::InvalidArgument, message.into())
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(Pc4pmStatus::InvalidUtf8, format!("`{what}` is not UTF-8")))
}

unsafe fn bytes<'a>(p: *const u8, len: usize, what: &str) -> Result<&'a [u8], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut T, value: T, what: &str) -> Outcome {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn put_log(out: *mut *mut Pc4pmLog, log: EventLog) -> Outcome {
    put(out, Box::into_raw(Box::new(Pc4pmLog { log })), "out")
}

unsafe fn put_buffer(out: *mut Pc4pmBuffer, data: Vec<u8>) -> Outcome {
    let mut boxed = data.into_boxed_slice();
    let buffer = Pc4pmBuffer { data: boxed.as_mut_ptr(), len: boxed.len() };
    std::mem::forget(boxed);
    put(out, buffer, "out")
}

fn knowledge_kind(raw: &str) -> Result<KnowledgeKind, Fail> {
    KnowledgeKind::parse(raw).ok_or_else(|| invalid(format!("unknown knowledge kind `{raw}`")))
}

fn key(key_ref: &str, secret: &[u8]) -> Result<KeySpec, Fail> {
    Ok(KeySpec::new(key_ref, secret.to_vec(), KeyMode::PseudonymizeDeterministic)?)
}

/// Message for the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn pc4pm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pc4pm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `buffer` must be NULL or point to a buffer filled by this library that has
/// not been freed.
#[no_mangle]
pub unsafe extern "C" fn pc4pm_buffer_free(buffer: *mut Pc4pmBuffer) {
    if let Some(b) = buffer.as_mut() {
        if !b.data.is_null() {
            drop(Box::from_raw(ptr::slice_from_raw_parts_mut(b.data, b.len)));
        }
        b.data = ptr::null_mut();
        b.len = 0;
    }
}

/// Parses XES bytes into a new log handle.
///
/// # Safety
/// `data` must point to `len` readable bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pc4pm_log_parse(data: *const u8, len: usize, out: *mut *mut Pc4pmLog) -> Pc4pmStatus {
    guard(|| put_log(out, parse_xes(bytes(data, len, "data")?)?))
}

/// # Safety
/// `log` must be NULL or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn pc4pm_log_free(log: *mut Pc4pmLog) {
    if !log.is_null() {
        drop(Box::from_raw(log));
    }
}

/// Canonical XES serialization.
///
/// # Safety
/// `log` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pc4pm_log_write(log: *const Pc4pmLog, out: *mut Pc4pmBuffer) -> Pc4pmStatus {
    guard(|| put_buffer(out, write_xes(&handle(log, "log")?.log)))
}

/// # Safety
/// `log` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pc4pm_log_trace_count(log: *const Pc4pmLog) -> usize {
    log.as_ref().map_or(0, |l| l.log.traces.len())
}

/// # Safety
/// `log` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pc4pm_log_event_count(log: *const Pc4pmLog) -> usize {
    log.as_ref().map_or(0, |l| l.log.event_count())
}

/// # Safety
/// `log` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pc4pm_log_metadata_count(log: *const Pc4pmLog) -> usize {
    log.as_ref().map_or(0, |l| l.log.privacy_metadata.len())
}

/// Suppression with a JSON selector such as
/// `{"level":"event","atoms":[{"key":"concept:name","op":"=","value":"d"}]}`.
/// `attributes_json` is NULL to remove whole matches, or a JSON array of
/// attribute keys to strip from them.
///
/// # Safety
/// Pointers must be live handles or NUL-terminated strings; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pc4pm_suppress(
    log: *const Pc4pmLog,
    selector_json: *const c_char,
    attributes_json: *const c_char,
    out: *mut *mut Pc4pmLog,
) -> Pc4pmStatus {
    guard(|| {
        let log = &handle(log, "log")?.log;
        let value: serde_json::Value =
            serde_json::from_str(text(selector_json, "selector_json")?).map_err(|e| invalid(e.to_string()))?;
        let selector = selector_from_json(&value).map_err(invalid)?;
        let target = if attributes_json.is_null() {
            SuppressTarget::WholeMatch
        } else {
            let attrs: Vec<String> =
                serde_json::from_str(text(attributes_json, "attributes_json")?).map_err(|e| invalid(e.to_string()))?;
            SuppressTarget::Attributes(attrs)
        };
        put_log(out, suppress(log, &selector, &target, &OpContext::latest_event(log))?)
    })
}

/// Group-privacy enforcement without timestamp generalization or a
/// sensitive attribute. `kind` is "set", "multiset" or "subsequence".
///
/// # Safety
/// Pointers must be live handles or NUL-terminated strings; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pc4pm_tlkc(
    log: *const Pc4pmLog,
    l: usize,
    k: usize,
    kind: *const c_char,
    out: *mut *mut Pc4pmLog,
) -> Pc4pmStatus {
    guard(|| {
        let log = &handle(log, "log")?.log;
        let kind = knowledge_kind(text(kind, "kind")?)?;
        put_log(out, enforce(log, &TlkcParams::new(l, k), kind, 0, &OpContext::latest_event(log))?)
    })
}

/// Differentially private publication with default pruning and variant length.
///
/// # Safety
/// `log` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pc4pm_dp_publish(
    log: *const Pc4pmLog,
    epsilon: f64,
    seed: u64,
    out: *mut *mut Pc4pmLog,
) -> Pc4pmStatus {
    guard(|| {
        let log = &handle(log, "log")?.log;
        put_log(out, dp_publish(log, &DpParams::new(epsilon, seed), &OpContext::latest_event(log))?)
    })
}

/// # Safety
/// Pointers must be live handles or NUL-terminated strings; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pc4pm_risk(
    log: *const Pc4pmLog,
    kind: *const c_char,
    l: usize,
    out: *mut Pc4pmRisk,
) -> Pc4pmStatus {
    guard(|| {
        let report = disclosure_risk(&handle(log, "log")?.log, knowledge_kind(text(kind, "kind")?)?, l)?;
        put(
            out,
            Pc4pmRisk { uniqueness_rate: report.uniqueness_rate, avg_reid_probability: report.avg_reid_probability },
            "out",
        )
    })
}

/// # Safety
/// `original` and `anonymized` must be live handles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pc4pm_utility(
    original: *const Pc4pmLog,
    anonymized: *const Pc4pmLog,
    out: *mut Pc4pmUtility,
) -> Pc4pmStatus {
    guard(|| {
        let u = data_utility(&handle(original, "original")?.log, &handle(anonymized, "anonymized")?.log);
        put(
            out,
            Pc4pmUtility {
                variant_preservation: u.variant_preservation,
                df_distance: u.df_distance,
                event_count_ratio: u.event_count_ratio,
            },
            "out",
        )
    })
}

/// Encodes the directly-follows graph of `log` under the given key.
///
/// # Safety
/// `log` must be a live handle, `key_ref` NUL-terminated, `secret` readable
/// for `secret_len` bytes, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pc4pm_connector_encode(
    log: *const Pc4pmLog,
    key_ref: *const c_char,
    secret: *const u8,
    secret_len: usize,
    out: *mut *mut Pc4pmAbstraction,
) -> Pc4pmStatus {
    guard(|| {
        let log = &handle(log, "log")?.log;
        let key = key(text(key_ref, "key_ref")?, bytes(secret, secret_len, "secret")?)?;
        let ela = connector::encode(log, &key, &OpContext::latest_event(log))?;
        put(out, Box::into_raw(Box::new(Pc4pmAbstraction { ela })), "out")
    })
}

/// Decodes a connector abstraction using the activity labels of
/// `dictionary` as candidates. Writes the graph as JSON.
///
/// # Safety
/// Handles must be live, `key_ref` NUL-terminated, `secret` readable for
/// `secret_len` bytes, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pc4pm_connector_decode(
    abstraction: *const Pc4pmAbstraction,
    key_ref: *const c_char,
    secret: *const u8,
    secret_len: usize,
    dictionary: *const Pc4pmLog,
    out: *mut Pc4pmBuffer,
) -> Pc4pmStatus {
    guard(|| {
        let ela = &handle(abstraction, "abstraction")?.ela;
        let key = key(text(key_ref, "key_ref")?, bytes(secret, secret_len, "secret")?)?;
        let labels: BTreeSet<String> = handle(dictionary, "dictionary")?.log.alphabet();
        let dfg = connector::decode(ela, &key, &labels)?;
        put_buffer(out, serde_json::to_vec(&dfg).expect("graph serializes"))
    })
}

/// # Safety
/// `data` must point to `len` readable bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pc4pm_abstraction_parse(
    data: *const u8,
    len: usize,
    out: *mut *mut Pc4pmAbstraction,
) -> Pc4pmStatus {
    guard(|| {
        let ela = parse_ela(bytes(data, len, "data")?)?;
        put(out, Box::into_raw(Box::new(Pc4pmAbstraction { ela })), "out")
    })
}

/// # Safety
/// `abstraction` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pc4pm_abstraction_write(
    abstraction: *const Pc4pmAbstraction,
    out: *mut Pc4pmBuffer,
) -> Pc4pmStatus {
    guard(|| put_buffer(out, write_ela(&handle(abstraction, "abstraction")?.ela)))
}

/// # Safety
/// `abstraction` must be NULL or a handle that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn pc4pm_abstraction_free(abstraction: *mut Pc4pmAbstraction) {
    if !abstraction.is_null() {
        drop(Box::from_raw(abstraction));
    }
}

/// Technique ids matching a JSON guide query such as `{"prac":"PPDP"}`.
/// NULL or `{}` matches everything. Writes a JSON array.
///
/// # Safety
/// `query_json` must be NULL or NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pc4pm_guide(query_json: *const c_char, out: *mut Pc4pmBuffer) -> Pc4pmStatus {
    guard(|| {
        let query: GuideQuery = if query_json.is_null() {
            GuideQuery::default()
        } else {
            serde_json::from_str(text(query_json, "query_json")?).map_err(|e| invalid(e.to_string()))?
        };
        put_buffer(out, serde_json::to_vec(&guidance::filter(&query)).expect("ids serialize"))
    })
}
