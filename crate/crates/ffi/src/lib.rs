//! C ABI over the underwrite core. Every function returns a [`UwStatus`];
//! results come back through out-pointers. On failure a description is kept
//! per thread and read with [`uw_last_error`].
//!
//! Ledgers are opaque [`UwLedger`] handles released with [`uw_ledger_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use underwrite_core::agent::{validate_output, ParsedOutput};
use underwrite_core::evaluation::{fisher_exact, mcnemar_exact, wilson_interval};
use underwrite_core::governance::{verify_chain, verify_file, AuditEventKind, AuditLedger, Durability, LedgerError};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UwStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Io = 4,
    LedgerCorrupt = 5,
    ReservedKind = 6,
    SchemaViolation = 7,
    Panic = 8,
}

/// Opaque ledger handle.
pub struct UwLedger {
    inner: AuditLedger,
}

/// No divergence: the chain verified clean.
pub const UW_NO_DIVERGENCE: u64 = u64::MAX;

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn fail(status: UwStatus, message: impl Into<String>) -> UwStatus {
    set_error(message);
    status
}

fn guard(f: impl FnOnce() -> UwStatus) -> UwStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| fail(UwStatus::Panic, "panic inside underwrite"))
}

/// # Safety
/// `s` must be null or a NUL-terminated string valid for the call.
unsafe fn text<'a>(s: *const c_char, name: &str) -> Result<&'a str, UwStatus> {
    if s.is_null() {
        return Err(fail(UwStatus::NullArgument, format!("{name} is null")));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| fail(UwStatus::InvalidUtf8, format!("{name} is not UTF-8")))
}

fn ledger_status(e: LedgerError) -> UwStatus {
    match e {
        LedgerError::ReservedKind(_) => fail(UwStatus::ReservedKind, e.to_string()),
        LedgerError::Corrupt(_) => fail(UwStatus::LedgerCorrupt, e.to_string()),
        other => fail(UwStatus::Io, other.to_string()),
    }
}

/// Description of the last failure on this thread, or null. The pointer stays
/// valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn uw_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn uw_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Wilson score interval for `successes` of `n` at quantile `z`.
///
/// # Safety
/// `lower` and `upper` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn uw_wilson_interval(successes: u64, n: u64, z: f64, lower: *mut f64, upper: *mut f64) -> UwStatus {
    guard(|| {
        if lower.is_null() || upper.is_null() {
            return fail(UwStatus::NullArgument, "output pointer is null");
        }
        match wilson_interval(successes, n, z) {
            Ok((lo, hi)) => {
                *lower = lo;
                *upper = hi;
                UwStatus::Ok
            }
            Err(e) => fail(UwStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Two-sided exact McNemar p-value from the discordant counts.
///
/// # Safety
/// `p` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn uw_mcnemar_exact(b: u64, c: u64, p: *mut f64) -> UwStatus {
    guard(|| {
        if p.is_null() {
            return fail(UwStatus::NullArgument, "output pointer is null");
        }
        *p = mcnemar_exact(b, c);
        UwStatus::Ok
    })
}

/// Two-sided Fisher exact p-value for the table `[[a, b], [c, d]]`.
///
/// # Safety
/// `p` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn uw_fisher_exact(a: u64, b: u64, c: u64, d: u64, p: *mut f64) -> UwStatus {
    guard(|| {
        if p.is_null() {
            return fail(UwStatus::NullArgument, "output pointer is null");
        }
        if a + b + c + d == 0 {
            return fail(UwStatus::InvalidArgument, "table is empty");
        }
        *p = fisher_exact([[a, b], [c, d]]);
        UwStatus::Ok
    })
}

/// Validates one agent output document (draft or critique). On a violation
/// the reason is available from [`uw_last_error`].
///
/// # Safety
/// `json` must be a NUL-terminated string. `is_critique` must be null or
/// valid for writes.
#[no_mangle]
pub unsafe extern "C" fn uw_validate_output(json: *const c_char, is_critique: *mut bool) -> UwStatus {
    guard(|| {
        let raw = match text(json, "json") {
            Ok(s) => s,
            Err(status) => return status,
        };
        match validate_output(raw) {
            Ok(parsed) => {
                if !is_critique.is_null() {
                    *is_critique = matches!(parsed, ParsedOutput::Critique(_));
                }
                UwStatus::Ok
            }
            Err(v) => fail(UwStatus::SchemaViolation, v.to_string()),
        }
    })
}

/// In-memory ledger on the system clock.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn uw_ledger_in_memory(out: *mut *mut UwLedger) -> UwStatus {
    guard(|| {
        if out.is_null() {
            return fail(UwStatus::NullArgument, "output pointer is null");
        }
        *out = Box::into_raw(Box::new(UwLedger {
            inner: AuditLedger::in_memory(),
        }));
        UwStatus::Ok
    })
}

/// Opens or creates a JSONL ledger file. An existing file whose chain is
/// broken is refused with `LedgerCorrupt`.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn uw_ledger_open(path: *const c_char, fsync: bool, out: *mut *mut UwLedger) -> UwStatus {
    guard(|| {
        if out.is_null() {
            return fail(UwStatus::NullArgument, "output pointer is null");
        }
        let path = match text(path, "path") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let durability = if fsync { Durability::Fsync } else { Durability::Flush };
        match AuditLedger::open(path, durability) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(UwLedger { inner }));
                UwStatus::Ok
            }
            Err(e) => ledger_status(e),
        }
    })
}

/// # Safety
/// `ledger` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn uw_ledger_free(ledger: *mut UwLedger) {
    if !ledger.is_null() {
        drop(Box::from_raw(ledger));
    }
}

/// Appends one event. `kind` is a snake_case event kind such as
/// `"agent_output"`; `human_decision` and `recorded` are refused with
/// `ReservedKind`. `payload_json` must be a JSON document.
///
/// # Safety
/// `ledger` must be a live handle; the strings must be NUL-terminated;
/// `seq` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn uw_ledger_append(
    ledger: *const UwLedger,
    case_id: *const c_char,
    kind: *const c_char,
    payload_json: *const c_char,
    seq: *mut u64,
) -> UwStatus {
    guard(|| {
        let Some(ledger) = ledger.as_ref() else {
            return fail(UwStatus::NullArgument, "ledger is null");
        };
        let (case_id, kind, payload) = match (text(case_id, "case_id"), text(kind, "kind"), text(payload_json, "payload_json")) {
            (Ok(a), Ok(b), Ok(c)) => (a, b, c),
            (Err(s), _, _) | (_, Err(s), _) | (_, _, Err(s)) => return s,
        };
        let kind: AuditEventKind = match serde_json::from_value(serde_json::Value::String(kind.to_string())) {
            Ok(k) => k,
            Err(_) => return fail(UwStatus::InvalidArgument, format!("unknown event kind {kind:?}")),
        };
        let payload: serde_json::Value = match serde_json::from_str(payload) {
            Ok(v) => v,
            Err(e) => return fail(UwStatus::InvalidArgument, format!("payload_json: {e}")),
        };
        match ledger.inner.append(case_id, kind, payload) {
            Ok(record) => {
                if !seq.is_null() {
                    *seq = record.seq;
                }
                UwStatus::Ok
            }
            Err(e) => ledger_status(e),
        }
    })
}

/// Number of records, header excluded.
///
/// # Safety
/// `ledger` must be a live handle; `len` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn uw_ledger_len(ledger: *const UwLedger, len: *mut u64) -> UwStatus {
    guard(|| {
        let Some(ledger) = ledger.as_ref() else {
            return fail(UwStatus::NullArgument, "ledger is null");
        };
        if len.is_null() {
            return fail(UwStatus::NullArgument, "output pointer is null");
        }
        *len = ledger.inner.len() as u64;
        UwStatus::Ok
    })
}

/// Recomputes the chain of a live ledger. `divergence_seq` receives the
/// first failing seq, or [`UW_NO_DIVERGENCE`].
///
/// # Safety
/// `ledger` must be a live handle; `divergence_seq` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn uw_ledger_verify(ledger: *const UwLedger, divergence_seq: *mut u64) -> UwStatus {
    guard(|| {
        let Some(ledger) = ledger.as_ref() else {
            return fail(UwStatus::NullArgument, "ledger is null");
        };
        if divergence_seq.is_null() {
            return fail(UwStatus::NullArgument, "output pointer is null");
        }
        report(verify_chain(&ledger.inner), ptr::null_mut(), divergence_seq)
    })
}

unsafe fn report(r: underwrite_core::governance::VerificationReport, checked: *mut u64, divergence_seq: *mut u64) -> UwStatus {
    if !checked.is_null() {
        *checked = r.records_checked;
    }
    match r.first_divergence {
        None => {
            *divergence_seq = UW_NO_DIVERGENCE;
            UwStatus::Ok
        }
        Some(d) => {
            *divergence_seq = d.seq;
            fail(UwStatus::LedgerCorrupt, format!("first divergence at seq {}: {:?}", d.seq, d.reason))
        }
    }
}

/// Verifies a ledger file on disk without opening it for append.
///
/// # Safety
/// `path` must be NUL-terminated; `records_checked` may be null;
/// `divergence_seq` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn uw_verify_file(path: *const c_char, records_checked: *mut u64, divergence_seq: *mut u64) -> UwStatus {
    guard(|| {
        let path = match text(path, "path") {
            Ok(s) => s,
            Err(status) => return status,
        };
        if divergence_seq.is_null() {
            return fail(UwStatus::NullArgument, "output pointer is null");
        }
        match verify_file(path) {
            Ok(r) => report(r, records_checked, divergence_seq),
            Err(e) => fail(UwStatus::Io, format!("{path}: {e}")),
        }
    })
}
