//! C ABI for the claimcheck debate engine.
//!
//! The surface follows the usual opaque-handle pattern: `claimcheck_engine`
//! is created from a JSON configuration string, driven through
//! `claimcheck_engine_verify`, and freed with `claimcheck_engine_free`.
//! Every function returns a [`ClaimcheckStatus`]; on failure,
//! `claimcheck_last_error` yields a thread-local message. Strings returned
//! through out-pointers are owned by the caller and must be released with
//! `claimcheck_string_free`.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::os::raw::{c_char, c_int};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::sync::Arc;

use serde::Deserialize;

use claimcheck::backends::{BackendHandle, CallLog, LoggedBackend};
use claimcheck::config::{BackendKind, CliOverrides, FileConfig, Settings};
use claimcheck::debate::{BackendCallCounts, DebateEngine, DebaterAgent, JudgeAgent, Transcript};
use claimcheck::domain::{exact_match, Claim, LabelSet};
use claimcheck::harness::{bootstrap_ci, BenchResources};

/// Status codes returned by every claimcheck function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClaimcheckStatus {
    Ok = 0,
    /// A pointer argument was null or a string was not valid UTF-8.
    InvalidArgument = 1,
    /// Configuration or input could not be parsed.
    Parse = 2,
    /// The backend or a tool failed.
    Backend = 3,
    /// The debate aborted; the transcript (if any) carries the reason.
    Aborted = 4,
    /// No label alias matched the given text.
    UnparsableLabel = 5,
    /// An internal invariant was violated.
    Internal = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: impl AsRef<str>) {
    let sanitized: String = message.as_ref().replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

/// Message for the most recent failure on this thread. The pointer stays
/// valid until the next claimcheck call on the same thread.
#[no_mangle]
pub extern "C" fn claimcheck_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn claimcheck_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Frees a string returned by this library. Passing null is a no-op.
///
/// # Safety
/// `s` must have been returned by a claimcheck function and not freed yet.
#[no_mangle]
pub unsafe extern "C" fn claimcheck_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

unsafe fn read_str<'a>(ptr: *const c_char) -> Result<&'a str, ClaimcheckStatus> {
    if ptr.is_null() {
        set_last_error("null pointer argument");
        return Err(ClaimcheckStatus::InvalidArgument);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_last_error("string is not valid UTF-8");
        ClaimcheckStatus::InvalidArgument
    })
}

fn write_string(out: *mut *mut c_char, value: String) -> ClaimcheckStatus {
    if out.is_null() {
        set_last_error("null out-pointer");
        return ClaimcheckStatus::InvalidArgument;
    }
    match CString::new(value.replace('\0', " ")) {
        Ok(cstring) => {
            unsafe { *out = cstring.into_raw() };
            ClaimcheckStatus::Ok
        }
        Err(_) => {
            set_last_error("value contains interior NUL");
            ClaimcheckStatus::Internal
        }
    }
}

fn label_set_from(ptr: *const c_char) -> Result<LabelSet, ClaimcheckStatus> {
    if ptr.is_null() {
        return Ok(LabelSet::fever());
    }
    let json = unsafe { read_str(ptr) }?;
    serde_json::from_str(json).map_err(|e| {
        set_last_error(format!("cannot parse label set: {e}"));
        ClaimcheckStatus::Parse
    })
}

fn guarded<F: FnOnce() -> ClaimcheckStatus>(f: F) -> ClaimcheckStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(panic) => {
            let message = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            set_last_error(format!("internal panic: {message}"));
            ClaimcheckStatus::Internal
        }
    }
}

/// Normalizes free-form verdict text into a canonical label.
///
/// `label_set_json` is an optional label-set document (`{"labels": [...],
/// "aliases": {...}, "fallback": "..."}`); pass null for the default
/// three-label set. On success `*out_label` holds the canonical label.
///
/// # Safety
/// Pointer arguments must be null or valid NUL-terminated strings;
/// `out_label` must be a valid out-pointer.
#[no_mangle]
pub unsafe extern "C" fn claimcheck_normalize_label(
    label_set_json: *const c_char,
    raw: *const c_char,
    out_label: *mut *mut c_char,
) -> ClaimcheckStatus {
    guarded(|| {
        let set = match label_set_from(label_set_json) {
            Ok(set) => set,
            Err(status) => return status,
        };
        let raw = match read_str(raw) {
            Ok(raw) => raw,
            Err(status) => return status,
        };
        match set.normalize(raw) {
            Ok(verdict) => write_string(out_label, verdict.label().to_string()),
            Err(e) => {
                set_last_error(e.to_string());
                ClaimcheckStatus::UnparsableLabel
            }
        }
    })
}

/// Exact-match comparison of two verdict texts under one label set.
/// Writes 1 into `*out` when the normalized labels are identical.
///
/// # Safety
/// Pointer arguments must be null or valid NUL-terminated strings; `out`
/// must be a valid out-pointer.
#[no_mangle]
pub unsafe extern "C" fn claimcheck_exact_match(
    label_set_json: *const c_char,
    pred: *const c_char,
    gold: *const c_char,
    out: *mut c_int,
) -> ClaimcheckStatus {
    guarded(|| {
        if out.is_null() {
            set_last_error("null out-pointer");
            return ClaimcheckStatus::InvalidArgument;
        }
        let set = match label_set_from(label_set_json) {
            Ok(set) => set,
            Err(status) => return status,
        };
        let (pred, gold) = match (read_str(pred), read_str(gold)) {
            (Ok(p), Ok(g)) => (p, g),
            (Err(status), _) | (_, Err(status)) => return status,
        };
        match (set.normalize(pred), set.normalize(gold)) {
            (Ok(p), Ok(g)) => {
                *out = exact_match(&p, &g) as c_int;
                ClaimcheckStatus::Ok
            }
            (Err(e), _) | (_, Err(e)) => {
                set_last_error(e.to_string());
                ClaimcheckStatus::UnparsableLabel
            }
        }
    })
}

/// Percentile-bootstrap confidence interval for the mean of boolean flags
/// (nonzero byte = true). Bounds land in `*out_lo` / `*out_hi`.
///
/// # Safety
/// `flags` must point to `len` readable bytes; out-pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn claimcheck_bootstrap_ci(
    flags: *const u8,
    len: usize,
    resamples: u32,
    level: f64,
    seed: u64,
    out_lo: *mut f64,
    out_hi: *mut f64,
) -> ClaimcheckStatus {
    guarded(|| {
        if flags.is_null() || out_lo.is_null() || out_hi.is_null() {
            set_last_error("null pointer argument");
            return ClaimcheckStatus::InvalidArgument;
        }
        if !(0.0..1.0).contains(&level) || level <= 0.0 || resamples == 0 {
            set_last_error("level must be in (0, 1) and resamples positive");
            return ClaimcheckStatus::InvalidArgument;
        }
        let slice = std::slice::from_raw_parts(flags, len);
        let bools: Vec<bool> = slice.iter().map(|&b| b != 0).collect();
        match bootstrap_ci(&bools, resamples as usize, level, seed) {
            Ok((lo, hi)) => {
                *out_lo = lo;
                *out_hi = hi;
                ClaimcheckStatus::Ok
            }
            Err(e) => {
                set_last_error(e.to_string());
                ClaimcheckStatus::InvalidArgument
            }
        }
    })
}

/// Engine configuration document accepted by [`claimcheck_engine_new`].
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct EngineConfigDoc {
    backend: Option<String>,
    script_path: Option<PathBuf>,
    index_path: Option<PathBuf>,
    search_fixtures: Option<PathBuf>,
    combo: Option<String>,
    rounds: Option<u32>,
    k: Option<usize>,
    faithfulness_min: Option<f64>,
    relevance_min: Option<f64>,
    scoring_feedback: Option<bool>,
    query_formulation: Option<bool>,
    seed: Option<u64>,
}

/// Opaque debate engine handle.
#[allow(non_camel_case_types)]
pub struct claimcheck_engine {
    settings: Settings,
    resources: BenchResources,
    counter: std::sync::atomic::AtomicU64,
}

#[allow(non_camel_case_types)]
type EngineHandle = claimcheck_engine;

fn build_engine(config_json: &str) -> Result<claimcheck_engine, (ClaimcheckStatus, String)> {
    let doc: EngineConfigDoc = serde_json::from_str(config_json)
        .map_err(|e| (ClaimcheckStatus::Parse, format!("cannot parse config: {e}")))?;
    let backend_kind = match doc.backend.as_deref() {
        None => None,
        Some(kind) => Some(
            kind.parse::<BackendKind>()
                .map_err(|e| (ClaimcheckStatus::Parse, e.to_string()))?,
        ),
    };
    let overrides = CliOverrides {
        backend: backend_kind,
        script: doc.script_path,
        index_path: doc.index_path,
        search_fixtures: doc.search_fixtures,
        combo: doc.combo,
        rounds: doc.rounds,
        retrieval_k: doc.k,
        faithfulness_min: doc.faithfulness_min,
        relevance_min: doc.relevance_min,
        no_query_formulation: doc.query_formulation == Some(false),
        no_scoring_feedback: doc.scoring_feedback == Some(false),
        ..CliOverrides::default()
    };
    let settings = Settings::resolve(FileConfig::default(), &overrides)
        .map_err(|e| (ClaimcheckStatus::Parse, e.to_string()))?;
    let resources = BenchResources {
        backend: settings
            .build_backend()
            .map_err(|e| (ClaimcheckStatus::Backend, e.to_string()))?,
        index: settings
            .build_index()
            .map_err(|e| (ClaimcheckStatus::Backend, e.to_string()))?,
        search: settings
            .build_search()
            .map_err(|e| (ClaimcheckStatus::Backend, e.to_string()))?,
        parallelism: 1,
    };
    for kind in settings.combo.kinds() {
        resources
            .tool_for(kind)
            .map_err(|e| (ClaimcheckStatus::Parse, e.to_string()))?;
    }
    Ok(claimcheck_engine {
        settings,
        resources,
        counter: std::sync::atomic::AtomicU64::new(0),
    })
}

/// Creates an engine from a JSON configuration:
///
/// ```json
/// {
///   "backend": "mock",
///   "script_path": "script.json",
///   "combo": "vanilla+vanilla",
///   "rounds": 3
/// }
/// ```
///
/// # Safety
/// `config_json` must be a valid NUL-terminated string; `out` must be a
/// valid out-pointer. The returned handle must be freed with
/// [`claimcheck_engine_free`].
#[no_mangle]
pub unsafe extern "C" fn claimcheck_engine_new(
    config_json: *const c_char,
    out: *mut *mut claimcheck_engine,
) -> ClaimcheckStatus {
    guarded(|| {
        if out.is_null() {
            set_last_error("null out-pointer");
            return ClaimcheckStatus::InvalidArgument;
        }
        let json = match read_str(config_json) {
            Ok(json) => json,
            Err(status) => return status,
        };
        match build_engine(json) {
            Ok(engine) => {
                *out = Box::into_raw(Box::new(engine));
                ClaimcheckStatus::Ok
            }
            Err((status, message)) => {
                set_last_error(message);
                status
            }
        }
    })
}

/// Frees an engine handle. Passing null is a no-op.
///
/// # Safety
/// `engine` must have come from [`claimcheck_engine_new`] and not be freed
/// twice.
#[no_mangle]
pub unsafe extern "C" fn claimcheck_engine_free(engine: *mut claimcheck_engine) {
    if !engine.is_null() {
        drop(Box::from_raw(engine));
    }
}

/// Runs one debate over `claim_text`. On success (including a judge
/// verdict), `*out_transcript_json` holds the full transcript document.
/// An aborted debate returns `CLAIMCHECK_STATUS_ABORTED` and still writes
/// the partial transcript when possible.
///
/// # Safety
/// `engine` must be a live handle from [`claimcheck_engine_new`];
/// `claim_text` must be a valid NUL-terminated string;
/// `out_transcript_json` must be a valid out-pointer.
#[no_mangle]
pub unsafe extern "C" fn claimcheck_engine_verify(
    engine: *mut claimcheck_engine,
    claim_text: *const c_char,
    out_transcript_json: *mut *mut c_char,
) -> ClaimcheckStatus {
    guarded(|| {
        if engine.is_null() {
            set_last_error("null engine handle");
            return ClaimcheckStatus::InvalidArgument;
        }
        let engine: &EngineHandle = &*engine;
        let claim_text = match read_str(claim_text) {
            Ok(text) => text,
            Err(status) => return status,
        };
        let claim_number = engine
            .counter
            .fetch_add(1, std::sync::atomic::Ordering::SeqCst);
        let claim = match Claim::new(format!("ffi-{claim_number}"), claim_text) {
            Ok(claim) => claim,
            Err(e) => {
                set_last_error(e.to_string());
                return ClaimcheckStatus::InvalidArgument;
            }
        };
        let kinds = engine.settings.combo.kinds();
        let names = engine.settings.combo.names();
        let log = CallLog::new();
        let logged: BackendHandle = Arc::new(LoggedBackend::new(
            engine.resources.backend.clone(),
            log.clone(),
        ));
        let tool = |kind| engine.resources.tool_for(kind).expect("validated at new");
        let agents = [
            DebaterAgent::new(
                claimcheck::domain::AgentId::new(kinds[0], names[0].clone()),
                tool(kinds[0]),
                logged.clone(),
            ),
            DebaterAgent::new(
                claimcheck::domain::AgentId::new(kinds[1], names[1].clone()),
                tool(kinds[1]),
                logged.clone(),
            ),
        ];
        let judge = JudgeAgent::new("judge", logged);
        let debate_engine = DebateEngine::new(engine.settings.debate.clone());
        let start = std::time::Instant::now();
        let result = debate_engine.run_debate(claim, &agents, &judge);
        let wall_ms = if engine.settings.debate.record_timing {
            start.elapsed().as_millis() as u64
        } else {
            0
        };
        let counts = BackendCallCounts {
            chat: log.chat_calls(),
            embed: log.embed_calls(),
        };
        let (transcript, status) = match &result {
            Ok(outcome) => (
                Transcript::from_outcome(outcome, &engine.settings.debate, wall_ms, counts),
                ClaimcheckStatus::Ok,
            ),
            Err(aborted) => {
                set_last_error(aborted.to_string());
                (
                    Transcript::from_aborted(aborted, &engine.settings.debate, wall_ms, counts),
                    ClaimcheckStatus::Aborted,
                )
            }
        };
        match transcript.to_json() {
            Ok(json) => {
                let write_status = write_string(out_transcript_json, json);
                if write_status == ClaimcheckStatus::Ok {
                    status
                } else {
                    write_status
                }
            }
            Err(e) => {
                set_last_error(e.to_string());
                ClaimcheckStatus::Internal
            }
        }
    })
}
