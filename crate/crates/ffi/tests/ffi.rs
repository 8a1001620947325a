//! Exercises the C ABI exactly as a foreign caller would: raw pointers,
//! status codes, and manual string ownership.

use std::ffi::{CStr, CString};
use std::os::raw::c_int;
use std::ptr;

use claimcheck_ffi::{
    claimcheck_bootstrap_ci, claimcheck_engine_free, claimcheck_engine_new,
    claimcheck_engine_verify, claimcheck_exact_match, claimcheck_last_error,
    claimcheck_normalize_label, claimcheck_string_free, claimcheck_version, ClaimcheckStatus,
};

fn cstring(s: &str) -> CString {
    CString::new(s).unwrap()
}

unsafe fn take_string(ptr: *mut std::os::raw::c_char) -> String {
    assert!(!ptr.is_null());
    let value = CStr::from_ptr(ptr).to_str().unwrap().to_string();
    claimcheck_string_free(ptr);
    value
}

#[test]
fn version_is_a_static_string() {
    let version = unsafe { CStr::from_ptr(claimcheck_version()) };
    assert_eq!(version.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn normalize_label_with_default_set() {
    let raw = cstring("supports.");
    let mut out = ptr::null_mut();
    let status = unsafe { claimcheck_normalize_label(ptr::null(), raw.as_ptr(), &mut out) };
    assert_eq!(status, ClaimcheckStatus::Ok);
    assert_eq!(unsafe { take_string(out) }, "SUPPORTS");
}

#[test]
fn normalize_label_failure_sets_last_error() {
    let raw = cstring("no verdict here");
    let mut out = ptr::null_mut();
    let status = unsafe { claimcheck_normalize_label(ptr::null(), raw.as_ptr(), &mut out) };
    assert_eq!(status, ClaimcheckStatus::UnparsableLabel);
    let message = unsafe { CStr::from_ptr(claimcheck_last_error()) };
    assert!(message.to_str().unwrap().contains("no label alias"));
}

#[test]
fn normalize_label_null_raw_is_invalid_argument() {
    let mut out = ptr::null_mut();
    let status = unsafe { claimcheck_normalize_label(ptr::null(), ptr::null(), &mut out) };
    assert_eq!(status, ClaimcheckStatus::InvalidArgument);
}

#[test]
fn normalize_label_with_custom_set() {
    let set = cstring(
        r#"{"labels": ["YES", "NO"], "aliases": {"affirmative": "YES"}, "fallback": "NO"}"#,
    );
    let raw = cstring("Affirmative!");
    let mut out = ptr::null_mut();
    let status = unsafe { claimcheck_normalize_label(set.as_ptr(), raw.as_ptr(), &mut out) };
    assert_eq!(status, ClaimcheckStatus::Ok);
    assert_eq!(unsafe { take_string(out) }, "YES");
}

#[test]
fn exact_match_compares_normalized_labels() {
    let pred = cstring("SUPPORTS: because evidence");
    let gold = cstring("supports");
    let mut out: c_int = -1;
    let status =
        unsafe { claimcheck_exact_match(ptr::null(), pred.as_ptr(), gold.as_ptr(), &mut out) };
    assert_eq!(status, ClaimcheckStatus::Ok);
    assert_eq!(out, 1);

    let gold = cstring("refutes");
    let status =
        unsafe { claimcheck_exact_match(ptr::null(), pred.as_ptr(), gold.as_ptr(), &mut out) };
    assert_eq!(status, ClaimcheckStatus::Ok);
    assert_eq!(out, 0);
}

#[test]
fn bootstrap_ci_matches_library_behavior() {
    let mut flags = vec![1u8; 146];
    flags.extend(vec![0u8; 54]);
    let (mut lo, mut hi) = (0.0f64, 0.0f64);
    let status = unsafe {
        claimcheck_bootstrap_ci(flags.as_ptr(), flags.len(), 10_000, 0.95, 7, &mut lo, &mut hi)
    };
    assert_eq!(status, ClaimcheckStatus::Ok);
    assert!((lo - 0.668).abs() <= 0.01, "lo {lo}");
    assert!((hi - 0.792).abs() <= 0.01, "hi {hi}");
}

#[test]
fn bootstrap_ci_rejects_null_and_empty() {
    let (mut lo, mut hi) = (0.0f64, 0.0f64);
    let status = unsafe {
        claimcheck_bootstrap_ci(ptr::null(), 0, 100, 0.95, 0, &mut lo, &mut hi)
    };
    assert_eq!(status, ClaimcheckStatus::InvalidArgument);
}

fn write_script(dir: &std::path::Path) -> std::path::PathBuf {
    let path = dir.join("script.json");
    let doc = serde_json::json!({
        "responses": [
            {"tag": "query-formulation", "response": "q"},
            {"tag": "respond", "response": "SUPPORTS: evidence agrees"},
            {"tag": "decompose", "response": "one fact"},
            {"tag": "verify", "response": "yes"},
            {"tag": "gen-questions", "response": "the moon orbits the earth"},
            {"tag": "judge", "response": "SUPPORTS"}
        ]
    });
    std::fs::write(&path, serde_json::to_string(&doc).unwrap()).unwrap();
    path
}

#[test]
fn engine_runs_a_full_debate_through_the_c_abi() {
    let dir = tempfile::tempdir().unwrap();
    let script = write_script(dir.path());
    let config = cstring(
        &serde_json::json!({
            "backend": "mock",
            "script_path": script,
            "combo": "vanilla+vanilla",
            "rounds": 3
        })
        .to_string(),
    );
    let mut engine = ptr::null_mut();
    let status = unsafe { claimcheck_engine_new(config.as_ptr(), &mut engine) };
    assert_eq!(status, ClaimcheckStatus::Ok, "last error: {}", unsafe {
        CStr::from_ptr(claimcheck_last_error()).to_string_lossy()
    });
    assert!(!engine.is_null());

    let claim = cstring("the moon orbits the earth");
    let mut transcript_ptr = ptr::null_mut();
    let status = unsafe { claimcheck_engine_verify(engine, claim.as_ptr(), &mut transcript_ptr) };
    assert_eq!(status, ClaimcheckStatus::Ok);
    let transcript_json = unsafe { take_string(transcript_ptr) };
    let transcript: serde_json::Value = serde_json::from_str(&transcript_json).unwrap();
    assert_eq!(transcript["verdict"]["label"], "SUPPORTS");
    assert_eq!(transcript["termination"], "consensus");
    assert_eq!(transcript["terminated_at_round"], 1);

    unsafe { claimcheck_engine_free(engine) };
}

#[test]
fn engine_rejects_bad_config() {
    let config = cstring("{\"backend\": \"quantum\"}");
    let mut engine = ptr::null_mut();
    let status = unsafe { claimcheck_engine_new(config.as_ptr(), &mut engine) };
    assert_eq!(status, ClaimcheckStatus::Parse);
    assert!(engine.is_null());

    let config = cstring("not json at all");
    let status = unsafe { claimcheck_engine_new(config.as_ptr(), &mut engine) };
    assert_eq!(status, ClaimcheckStatus::Parse);
}

#[test]
fn engine_verify_rejects_null_engine() {
    let claim = cstring("x");
    let mut out = ptr::null_mut();
    let status = unsafe { claimcheck_engine_verify(ptr::null_mut(), claim.as_ptr(), &mut out) };
    assert_eq!(status, ClaimcheckStatus::InvalidArgument);
}
