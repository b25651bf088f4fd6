//! C ABI over the kav verification library.
//!
//! All types cross the boundary as opaque handles created and destroyed by
//! this library; every fallible call returns a `kav_status`. Strings handed
//! out (keys, witness/certificate JSON) are NUL-terminated, UTF-8, and owned
//! by the caller until released with `kav_string_free`.
//!
//! The generated header lives at `include/kav.h`.

#![allow(non_camel_case_types)]

use std::collections::BTreeMap;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use kav::fzf::check_2atomic_fzf;
use kav::history::{normalize, parse_trace, partition_by_key, validate, History};
use kav::lbt::check_2atomic_lbt;
use kav::oracle::{brute_force_k_atomic_with, min_k, MinK, OracleOptions};
use kav::verdict::Verdict;
use kav::zones::check_1atomic;

/// Result of every fallible call in this API.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum kav_status {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// Input bytes were not valid UTF-8.
    InvalidUtf8 = 2,
    /// The trace did not parse; see stderr of the caller for detail.
    ParseError = 3,
    /// The requested register key does not appear in the trace.
    KeyNotFound = 4,
    /// The history failed validation (anomalies present).
    HistoryAnomalous = 5,
    /// The algorithm cannot decide the requested k.
    UnsupportedK = 6,
    /// The history exceeds the exhaustive-search cap.
    CapExceeded = 7,
    /// An internal invariant failed; the operation was aborted.
    Internal = 8,
}

/// Verifier selection for `kav_history_check`.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum kav_algorithm {
    /// Zone conditions for k=1, chunk decomposition for k=2, exhaustive
    /// search otherwise.
    Auto = 0,
    /// Zone conditions; requires k=1.
    Gk = 1,
    /// Limited backtracking; requires k=2.
    Lbt = 2,
    /// Chunk decomposition; requires k=2.
    Fzf = 3,
    /// Exhaustive search at any k, limited by the cap.
    Brute = 4,
}

/// A parsed multi-register trace. Opaque.
pub struct kav_trace {
    histories: BTreeMap<String, History>,
}

/// A validated, normalized single-register history. Opaque.
pub struct kav_history {
    history: History,
}

/// A verification result with optional witness and certificate. Opaque.
pub struct kav_verdict {
    verdict: Verdict,
}

fn guard(body: impl FnOnce() -> kav_status) -> kav_status {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => kav_status::Internal,
    }
}

unsafe fn write_out<T>(out: *mut *mut T, value: T) -> kav_status {
    if out.is_null() {
        return kav_status::NullArgument;
    }
    unsafe { *out = Box::into_raw(Box::new(value)) };
    kav_status::Ok
}

fn to_c_string(s: &str) -> *mut c_char {
    CString::new(s.as_bytes().to_vec())
        .map(CString::into_raw)
        .unwrap_or(ptr::null_mut())
}

/// Parses a JSON-lines trace from a byte buffer and partitions it by key.
///
/// # Safety
/// `data` must point to `len` readable bytes; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kav_trace_parse(
    data: *const u8,
    len: usize,
    out: *mut *mut kav_trace,
) -> kav_status {
    if data.is_null() || out.is_null() {
        return kav_status::NullArgument;
    }
    let bytes = unsafe { std::slice::from_raw_parts(data, len) };
    guard(|| match parse_trace(bytes) {
        Ok(trace) => {
            let histories = partition_by_key(&trace);
            unsafe { write_out(out, kav_trace { histories }) }
        }
        Err(_) => kav_status::ParseError,
    })
}

/// Number of register keys in the trace.
#[no_mangle]
pub extern "C" fn kav_trace_key_count(trace: *const kav_trace) -> usize {
    if trace.is_null() {
        return 0;
    }
    unsafe { &*trace }.histories.len()
}

/// Returns the key at `index` (keys are sorted). Release with
/// `kav_string_free`.
///
/// # Safety
/// `trace` must come from `kav_trace_parse`; `out_key` must be valid.
#[no_mangle]
pub unsafe extern "C" fn kav_trace_key_at(
    trace: *const kav_trace,
    index: usize,
    out_key: *mut *mut c_char,
) -> kav_status {
    if trace.is_null() || out_key.is_null() {
        return kav_status::NullArgument;
    }
    let trace = unsafe { &*trace };
    match trace.histories.keys().nth(index) {
        Some(key) => {
            unsafe { *out_key = to_c_string(key) };
            kav_status::Ok
        }
        None => kav_status::KeyNotFound,
    }
}

/// Extracts, validates and normalizes one register's history.
///
/// # Safety
/// `trace` must come from `kav_trace_parse`; `key` must be a NUL-terminated
/// string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn kav_trace_history(
    trace: *const kav_trace,
    key: *const c_char,
    out: *mut *mut kav_history,
) -> kav_status {
    if trace.is_null() || key.is_null() || out.is_null() {
        return kav_status::NullArgument;
    }
    let trace = unsafe { &*trace };
    let Ok(key) = unsafe { CStr::from_ptr(key) }.to_str() else {
        return kav_status::InvalidUtf8;
    };
    guard(|| {
        let Some(h) = trace.histories.get(key) else {
            return kav_status::KeyNotFound;
        };
        if !validate(h).is_empty() {
            return kav_status::HistoryAnomalous;
        }
        unsafe { write_out(out, kav_history { history: normalize(h) }) }
    })
}

/// Number of operations in the history.
#[no_mangle]
pub extern "C" fn kav_history_op_count(history: *const kav_history) -> usize {
    if history.is_null() {
        return 0;
    }
    unsafe { &*history }.history.len()
}

/// Decides k-atomicity of the history.
///
/// `brute_cap` bounds the exhaustive search (operations); pass 0 for the
/// default cap.
///
/// # Safety
/// `history` must come from `kav_trace_history`; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn kav_history_check(
    history: *const kav_history,
    k: u32,
    algorithm: kav_algorithm,
    brute_cap: usize,
    out: *mut *mut kav_verdict,
) -> kav_status {
    if history.is_null() || out.is_null() {
        return kav_status::NullArgument;
    }
    if k == 0 {
        return kav_status::UnsupportedK;
    }
    let h = &unsafe { &*history }.history;
    let cap = if brute_cap == 0 { kav::oracle::DEFAULT_ORACLE_CAP } else { brute_cap };
    let algorithm = match algorithm {
        kav_algorithm::Auto => match k {
            1 => kav_algorithm::Gk,
            2 => kav_algorithm::Fzf,
            _ => kav_algorithm::Brute,
        },
        other => other,
    };
    guard(|| {
        let verdict = match (algorithm, k) {
            (kav_algorithm::Gk, 1) => check_1atomic(h),
            (kav_algorithm::Lbt, 2) => check_2atomic_lbt(h),
            (kav_algorithm::Fzf, 2) => check_2atomic_fzf(h),
            (kav_algorithm::Brute, _) => {
                let opts = OracleOptions { cap, tie_seed: None };
                match brute_force_k_atomic_with(h, k, &opts) {
                    Ok(v) => v,
                    Err(_) => return kav_status::CapExceeded,
                }
            }
            _ => return kav_status::UnsupportedK,
        };
        unsafe { write_out(out, kav_verdict { verdict }) }
    })
}

/// Smallest k for which the history is k-atomic.
///
/// On `KAV_STATUS_OK`, `*out_k` holds the answer and `*out_exact` is 1; when
/// the history is too large for the exhaustive scan, `*out_k` holds a lower
/// bound and `*out_exact` is 0.
///
/// # Safety
/// `history` must come from `kav_trace_history`; out pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn kav_history_min_k(
    history: *const kav_history,
    brute_cap: usize,
    out_k: *mut u32,
    out_exact: *mut c_int,
) -> kav_status {
    if history.is_null() || out_k.is_null() || out_exact.is_null() {
        return kav_status::NullArgument;
    }
    let h = &unsafe { &*history }.history;
    let cap = if brute_cap == 0 { kav::oracle::DEFAULT_ORACLE_CAP } else { brute_cap };
    guard(|| {
        match min_k(h, cap) {
            MinK::Exact(k) => unsafe {
                *out_k = k;
                *out_exact = 1;
            },
            MinK::Unknown { lower_bound } => unsafe {
                *out_k = lower_bound;
                *out_exact = 0;
            },
        }
        kav_status::Ok
    })
}

/// 1 when the verdict is YES, 0 otherwise (including null).
#[no_mangle]
pub extern "C" fn kav_verdict_is_yes(verdict: *const kav_verdict) -> c_int {
    if verdict.is_null() {
        return 0;
    }
    unsafe { &*verdict }.verdict.is_yes() as c_int
}

/// Deterministic work counter of the verification run.
#[no_mangle]
pub extern "C" fn kav_verdict_steps(verdict: *const kav_verdict) -> u64 {
    if verdict.is_null() {
        return 0;
    }
    unsafe { &*verdict }.verdict.stats.steps
}

/// Witness order as JSON (a YES verdict from lbt/fzf/brute), or null when
/// the verdict carries none. Release with `kav_string_free`.
///
/// # Safety
/// `verdict` must come from `kav_history_check`; `out_json` must be valid.
#[no_mangle]
pub unsafe extern "C" fn kav_verdict_witness_json(
    verdict: *const kav_verdict,
    out_json: *mut *mut c_char,
) -> kav_status {
    if verdict.is_null() || out_json.is_null() {
        return kav_status::NullArgument;
    }
    let v = &unsafe { &*verdict }.verdict;
    let json = match &v.witness {
        Some(w) => serde_json::to_string(w).map(|s| to_c_string(&s)).unwrap_or(ptr::null_mut()),
        None => ptr::null_mut(),
    };
    unsafe { *out_json = json };
    kav_status::Ok
}

/// NO certificate as JSON, or null for YES verdicts. Release with
/// `kav_string_free`.
///
/// # Safety
/// `verdict` must come from `kav_history_check`; `out_json` must be valid.
#[no_mangle]
pub unsafe extern "C" fn kav_verdict_certificate_json(
    verdict: *const kav_verdict,
    out_json: *mut *mut c_char,
) -> kav_status {
    if verdict.is_null() || out_json.is_null() {
        return kav_status::NullArgument;
    }
    let v = &unsafe { &*verdict }.verdict;
    let json = match &v.certificate {
        Some(c) => serde_json::to_string(c).map(|s| to_c_string(&s)).unwrap_or(ptr::null_mut()),
        None => ptr::null_mut(),
    };
    unsafe { *out_json = json };
    kav_status::Ok
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn kav_status_message(status: kav_status) -> *const c_char {
    let msg: &'static [u8] = match status {
        kav_status::Ok => b"ok\0",
        kav_status::NullArgument => b"null argument\0",
        kav_status::InvalidUtf8 => b"invalid utf-8\0",
        kav_status::ParseError => b"trace parse error\0",
        kav_status::KeyNotFound => b"key not found\0",
        kav_status::HistoryAnomalous => b"history has anomalies\0",
        kav_status::UnsupportedK => b"algorithm cannot decide this k\0",
        kav_status::CapExceeded => b"history above exhaustive-search cap\0",
        kav_status::Internal => b"internal error\0",
    };
    msg.as_ptr().cast()
}

/// Releases a string returned by this library. Null is a no-op.
///
/// # Safety
/// `s` must have been returned by this library and not freed before.
#[no_mangle]
pub unsafe extern "C" fn kav_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}

/// Releases a trace handle. Null is a no-op.
///
/// # Safety
/// `trace` must come from `kav_trace_parse` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn kav_trace_free(trace: *mut kav_trace) {
    if !trace.is_null() {
        drop(unsafe { Box::from_raw(trace) });
    }
}

/// Releases a history handle. Null is a no-op.
///
/// # Safety
/// `history` must come from `kav_trace_history` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn kav_history_free(history: *mut kav_history) {
    if !history.is_null() {
        drop(unsafe { Box::from_raw(history) });
    }
}

/// Releases a verdict handle. Null is a no-op.
///
/// # Safety
/// `verdict` must come from `kav_history_check` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn kav_verdict_free(verdict: *mut kav_verdict) {
    if !verdict.is_null() {
        drop(unsafe { Box::from_raw(verdict) });
    }
}
