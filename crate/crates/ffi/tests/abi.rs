use std::ffi::{CStr, CString};
use std::ptr;

use pc4pm_core::fixtures::fix1;
use pc4pm_core::xes::write_xes;
use pc4pm_ffi::*;

const SECRET: &[u8] = b"an ffi test secret of 32 bytes!!";

fn parse(xes: &[u8]) -> *mut Pc4pmLog {
    let mut log = ptr::null_mut();
    assert_eq!(unsafe { pc4pm_log_parse(xes.as_ptr(), xes.len(), &mut log) }, Pc4pmStatus::Ok);
    log
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(pc4pm_last_error()) }.to_string_lossy().into_owned()
}

fn take(mut buf: Pc4pmBuffer) -> Vec<u8> {
    let out = unsafe { std::slice::from_raw_parts(buf.data, buf.len) }.to_vec();
    unsafe { pc4pm_buffer_free(&mut buf) };
    assert!(buf.data.is_null());
    out
}

fn empty() -> Pc4pmBuffer {
    Pc4pmBuffer { data: ptr::null_mut(), len: 0 }
}

#[test]
fn parse_write_round_trip() {
    let xes = write_xes(&fix1());
    let log = parse(&xes);
    unsafe {
        assert_eq!(pc4pm_log_trace_count(log), 3);
        assert_eq!(pc4pm_log_event_count(log), 8);
        let mut buf = empty();
        assert_eq!(pc4pm_log_write(log, &mut buf), Pc4pmStatus::Ok);
        assert_eq!(take(buf), xes);
        pc4pm_log_free(log);
    }
}

#[test]
fn parse_failure_sets_last_error() {
    let mut log = ptr::null_mut();
    let bad = b"<log><trace>";
    assert_eq!(unsafe { pc4pm_log_parse(bad.as_ptr(), bad.len(), &mut log) }, Pc4pmStatus::Parse);
    assert!(log.is_null());
    assert!(!last_error().is_empty());
    assert_eq!(unsafe { pc4pm_log_parse(ptr::null(), 3, &mut log) }, Pc4pmStatus::NullPointer);
}

#[test]
fn tlkc_then_risk_and_utility() {
    let original = parse(&write_xes(&fix1()));
    let set = CString::new("set").unwrap();
    unsafe {
        let mut risk = Pc4pmRisk::default();
        assert_eq!(pc4pm_risk(original, set.as_ptr(), 1, &mut risk), Pc4pmStatus::Ok);
        assert!((risk.uniqueness_rate - 1.0 / 3.0).abs() < 1e-12);
        assert!((risk.avg_reid_probability - 2.0 / 3.0).abs() < 1e-12);

        let mut anon = ptr::null_mut();
        assert_eq!(pc4pm_tlkc(original, 1, 2, set.as_ptr(), &mut anon), Pc4pmStatus::Ok);
        assert_eq!(pc4pm_log_event_count(anon), 7);
        assert_eq!(pc4pm_log_metadata_count(anon), 1);

        let mut u = Pc4pmUtility::default();
        assert_eq!(pc4pm_utility(original, anon, &mut u), Pc4pmStatus::Ok);
        assert!((u.variant_preservation - 0.5).abs() < 1e-9);
        assert!((u.df_distance - 0.2).abs() < 1e-9);
        assert!((u.event_count_ratio - 0.875).abs() < 1e-9);

        let mut none = ptr::null_mut();
        assert_eq!(pc4pm_tlkc(original, 1, 4, set.as_ptr(), &mut none), Pc4pmStatus::EmptyResult);
        let bogus = CString::new("bag").unwrap();
        assert_eq!(pc4pm_tlkc(original, 1, 2, bogus.as_ptr(), &mut none), Pc4pmStatus::InvalidArgument);
        pc4pm_log_free(anon);
        pc4pm_log_free(original);
    }
}

#[test]
fn suppress_with_json_selector() {
    let log = parse(&write_xes(&fix1()));
    let sel = CString::new(r#"{"level":"event","atoms":[{"key":"concept:name","op":"=","value":"d"}]}"#).unwrap();
    let attrs = CString::new(r#"["org:resource"]"#).unwrap();
    unsafe {
        let mut out = ptr::null_mut();
        assert_eq!(pc4pm_suppress(log, sel.as_ptr(), ptr::null(), &mut out), Pc4pmStatus::Ok);
        assert_eq!(pc4pm_log_event_count(out), 7);
        pc4pm_log_free(out);
        assert_eq!(pc4pm_suppress(log, sel.as_ptr(), attrs.as_ptr(), &mut out), Pc4pmStatus::Ok);
        assert_eq!(pc4pm_log_event_count(out), 8);
        pc4pm_log_free(out);
        let unknown = CString::new(r#"{"level":"event","atoms":[{"key":"nope","op":"=","value":"d"}]}"#).unwrap();
        assert_eq!(pc4pm_suppress(log, unknown.as_ptr(), ptr::null(), &mut out), Pc4pmStatus::UnknownAttribute);
        pc4pm_log_free(log);
    }
}

#[test]
fn dp_publish_validates_epsilon() {
    let log = parse(&write_xes(&fix1()));
    unsafe {
        let mut out = ptr::null_mut();
        assert_eq!(pc4pm_dp_publish(log, 0.0, 1, &mut out), Pc4pmStatus::InvalidEpsilon);
        assert_eq!(pc4pm_dp_publish(log, 1e6, 1, &mut out), Pc4pmStatus::Ok);
        assert_eq!(pc4pm_log_trace_count(out), 3);
        pc4pm_log_free(out);
        pc4pm_log_free(log);
    }
}

#[test]
fn connector_round_trip_through_bytes() {
    let log = parse(&write_xes(&fix1()));
    let key_ref = CString::new("ffi").unwrap();
    unsafe {
        let mut ela = ptr::null_mut();
        assert_eq!(
            pc4pm_connector_encode(log, key_ref.as_ptr(), SECRET.as_ptr(), SECRET.len(), &mut ela),
            Pc4pmStatus::Ok
        );
        let mut buf = empty();
        assert_eq!(pc4pm_abstraction_write(ela, &mut buf), Pc4pmStatus::Ok);
        let text = take(buf);
        assert!(!String::from_utf8_lossy(&text).contains("an ffi test secret"));
        pc4pm_abstraction_free(ela);

        let mut reparsed = ptr::null_mut();
        assert_eq!(pc4pm_abstraction_parse(text.as_ptr(), text.len(), &mut reparsed), Pc4pmStatus::Ok);
        let mut graph = empty();
        assert_eq!(
            pc4pm_connector_decode(reparsed, key_ref.as_ptr(), SECRET.as_ptr(), SECRET.len(), log, &mut graph),
            Pc4pmStatus::Ok
        );
        let dfg: serde_json::Value = serde_json::from_slice(&take(graph)).unwrap();
        let expected = serde_json::to_value(pc4pm_core::stats::df_graph(&fix1())).unwrap();
        assert_eq!(dfg, expected);

        let mut g2 = empty();
        let wrong = b"a different secret, also 32 byte";
        assert_eq!(
            pc4pm_connector_decode(reparsed, key_ref.as_ptr(), wrong.as_ptr(), wrong.len(), log, &mut g2),
            Pc4pmStatus::Unresolved
        );
        pc4pm_abstraction_free(reparsed);
        pc4pm_log_free(log);
    }
}

#[test]
fn guide_returns_ids() {
    unsafe {
        let mut buf = empty();
        assert_eq!(pc4pm_guide(ptr::null(), &mut buf), Pc4pmStatus::Ok);
        let ids: Vec<String> = serde_json::from_slice(&take(buf)).unwrap();
        assert_eq!(ids.len(), 6);
        let bad = CString::new("{\"nope\":1}").unwrap();
        let mut buf = empty();
        assert_eq!(pc4pm_guide(bad.as_ptr(), &mut buf), Pc4pmStatus::InvalidArgument);
        assert!(CStr::from_ptr(pc4pm_version()).to_str().unwrap().starts_with("0."));
    }
}
