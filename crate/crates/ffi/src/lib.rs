//! C ABI over `ea-core`.
//!
//! Conventions:
//! - Every fallible call returns an [`EaStatus`]; `EA_STATUS_OK` is zero.
//! - After a failure, [`ea_last_error_message`] describes it. For parse
//!   failures the message is a JSON array of `{line, column, code, message}`.
//! - Strings handed out through `out` parameters are owned by the caller and
//!   must be released with [`ea_string_free`].
//! - Argument handles come from [`ea_argument_new`] or [`ea_argument_parse`]
//!   and are released with [`ea_argument_free`]. A handle must not be used
//!   from two threads at once.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ea_core::model::ModelError;
use ea_core::rules::{check_text, coverage, validate, CoverageError};
use ea_core::stats::{kendall_tau_b, tau_confidence_interval};
use ea_core::{parse, serialize, EaArgument, ElementKind, TerminatorKind};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    InvalidInput = 4,
    DuplicateId = 5,
    UnknownId = 6,
    DuplicateEdge = 7,
    CycleIntroduced = 8,
    IllegalAttachment = 9,
    AlreadyTerminated = 10,
    PreconditionViolated = 11,
    StatsError = 12,
    Panic = 99,
}

/// Opaque argument graph.
pub struct EaArgumentHandle {
    inner: EaArgument,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(EaStatus, String);

type FfiResult<T> = Result<T, Failure>;

fn set_last_error(message: String) {
    let message = CString::new(message.replace('\0', " ")).expect("NULs removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(message));
}

fn guard(f: impl FnOnce() -> FfiResult<()>) -> EaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
            EaStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            EaStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(EaStatus::NullPointer, format!("`{what}` is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> FfiResult<&'a str> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(EaStatus::InvalidUtf8, format!("`{what}` is not UTF-8")))
}

unsafe fn handle<'a>(h: *const EaArgumentHandle) -> FfiResult<&'a EaArgumentHandle> {
    h.as_ref().ok_or_else(|| null("argument"))
}

unsafe fn handle_mut<'a>(h: *mut EaArgumentHandle) -> FfiResult<&'a mut EaArgumentHandle> {
    h.as_mut().ok_or_else(|| null("argument"))
}

unsafe fn write_string(out: *mut *mut c_char, s: String) -> FfiResult<()> {
    if out.is_null() {
        return Err(null("out"));
    }
    let c = CString::new(s)
        .map_err(|_| Failure(EaStatus::InvalidInput, "output contains NUL".into()))?;
    *out = c.into_raw();
    Ok(())
}

fn model_failure(e: ModelError) -> Failure {
    let status = match &e {
        ModelError::DuplicateId(_) => EaStatus::DuplicateId,
        ModelError::UnknownId(_) => EaStatus::UnknownId,
        ModelError::DuplicateEdge(..) => EaStatus::DuplicateEdge,
        ModelError::CycleIntroduced(..) | ModelError::SelfEdge(_) => EaStatus::CycleIntroduced,
        ModelError::IllegalAttachment { .. } => EaStatus::IllegalAttachment,
        ModelError::AlreadyTerminated(_) => EaStatus::AlreadyTerminated,
        _ => EaStatus::InvalidInput,
    };
    Failure(status, e.to_string())
}

fn kind_arg(s: &str) -> FfiResult<ElementKind> {
    s.parse()
        .ok()
        .or_else(|| ElementKind::from_short_name(s))
        .ok_or_else(|| {
            Failure(
                EaStatus::InvalidInput,
                format!("unknown element kind `{s}`"),
            )
        })
}

/// Description of the last failure on this thread, or NULL after a success.
/// The pointer stays valid until the next `ea_*` call on the same thread.
#[no_mangle]
pub extern "C" fn ea_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Releases a string returned through an `out` parameter. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn ea_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// New empty argument. Never NULL.
#[no_mangle]
pub extern "C" fn ea_argument_new() -> *mut EaArgumentHandle {
    Box::into_raw(Box::new(EaArgumentHandle {
        inner: EaArgument::new(),
    }))
}

/// Parses ea-text into a new handle stored in `*out`.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ea_argument_parse(
    text: *const c_char,
    out: *mut *mut EaArgumentHandle,
) -> EaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = str_arg(text, "text")?;
        let inner = parse(text).map_err(|errors| {
            Failure(
                EaStatus::ParseError,
                serde_json::to_string(&errors).expect("parse errors serialize"),
            )
        })?;
        *out = Box::into_raw(Box::new(EaArgumentHandle { inner }));
        Ok(())
    })
}

/// Releases a handle. NULL is ignored.
///
/// # Safety
/// `h` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn ea_argument_free(h: *mut EaArgumentHandle) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Number of elements; 0 for NULL.
///
/// # Safety
/// `h` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ea_argument_element_count(h: *const EaArgumentHandle) -> usize {
    h.as_ref().map_or(0, |h| h.inner.len())
}

/// Adds an element. `kind` is a full kind name (`Claim`, `RebuttingDefeater`, ...)
/// or a short one (`Rebutting`, ...).
///
/// # Safety
/// `h` must be a live handle; string arguments must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn ea_argument_add_element(
    h: *mut EaArgumentHandle,
    id: *const c_char,
    kind: *const c_char,
    text: *const c_char,
) -> EaStatus {
    guard(|| {
        let h = handle_mut(h)?;
        let kind = kind_arg(str_arg(kind, "kind")?)?;
        h.inner
            .add_element(str_arg(id, "id")?, kind, str_arg(text, "text")?)
            .map_err(model_failure)?;
        Ok(())
    })
}

/// Adds the edge `parent -> child`.
///
/// # Safety
/// `h` must be a live handle; string arguments must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn ea_argument_connect(
    h: *mut EaArgumentHandle,
    parent: *const c_char,
    child: *const c_char,
) -> EaStatus {
    guard(|| {
        let h = handle_mut(h)?;
        h.inner
            .connect(str_arg(parent, "parent")?, str_arg(child, "child")?)
            .map_err(model_failure)?;
        Ok(())
    })
}

/// Attaches `AssumedOK` or `IsOK` to an element.
///
/// # Safety
/// `h` must be a live handle; string arguments must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn ea_argument_attach_terminator(
    h: *mut EaArgumentHandle,
    id: *const c_char,
    terminator: *const c_char,
) -> EaStatus {
    guard(|| {
        let h = handle_mut(h)?;
        let name = str_arg(terminator, "terminator")?;
        let t = TerminatorKind::from_text_name(name).ok_or_else(|| {
            Failure(
                EaStatus::InvalidInput,
                format!("unknown terminator `{name}`"),
            )
        })?;
        h.inner
            .attach_terminator(str_arg(id, "id")?, t)
            .map_err(model_failure)?;
        Ok(())
    })
}

/// Canonical ea-text.
///
/// # Safety
/// `h` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ea_argument_serialize(
    h: *const EaArgumentHandle,
    out: *mut *mut c_char,
) -> EaStatus {
    guard(|| write_string(out, serialize(&handle(h)?.inner)))
}

/// Diagnostics as a JSON array.
///
/// # Safety
/// `h` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ea_argument_validate_json(
    h: *const EaArgumentHandle,
    out: *mut *mut c_char,
) -> EaStatus {
    guard(|| {
        let diagnostics = validate(&handle(h)?.inner);
        write_string(
            out,
            serde_json::to_string(&diagnostics).expect("diagnostics serialize"),
        )
    })
}

/// Coverage report as a JSON object. Fails with `EA_STATUS_PRECONDITION_VIOLATED`
/// while structural errors remain.
///
/// # Safety
/// `h` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ea_argument_coverage_json(
    h: *const EaArgumentHandle,
    out: *mut *mut c_char,
) -> EaStatus {
    guard(|| {
        let report =
            coverage(&handle(h)?.inner).map_err(|CoverageError::PreconditionViolated(d)| {
                Failure(
                    EaStatus::PreconditionViolated,
                    serde_json::to_string(&d).expect("diagnostics serialize"),
                )
            })?;
        write_string(
            out,
            serde_json::to_string(&report).expect("report serializes"),
        )
    })
}

/// Text-pattern findings for one element text, as a JSON array.
///
/// # Safety
/// String arguments must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ea_check_text(
    kind: *const c_char,
    text: *const c_char,
    out: *mut *mut c_char,
) -> EaStatus {
    guard(|| {
        let kind = kind_arg(str_arg(kind, "kind")?)?;
        let findings = check_text(kind, str_arg(text, "text")?);
        write_string(
            out,
            serde_json::to_string(&findings).expect("diagnostics serialize"),
        )
    })
}

/// Kendall tau-b of two paired score vectors of length `n`.
///
/// # Safety
/// `x` and `y` must point to `n` readable values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ea_kendall_tau_b(
    x: *const i64,
    y: *const i64,
    n: usize,
    out: *mut f64,
) -> EaStatus {
    guard(|| {
        if x.is_null() || y.is_null() || out.is_null() {
            return Err(null("x, y or out"));
        }
        let (x, y) = (
            std::slice::from_raw_parts(x, n),
            std::slice::from_raw_parts(y, n),
        );
        *out = kendall_tau_b(x, y).map_err(|e| Failure(EaStatus::StatsError, e.to_string()))?;
        Ok(())
    })
}

/// Two-sided normal-approximation interval for tau, clamped to [-1, 1].
///
/// # Safety
/// `low` and `high` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ea_tau_confidence_interval(
    tau: f64,
    n: usize,
    level: f64,
    low: *mut f64,
    high: *mut f64,
) -> EaStatus {
    guard(|| {
        if low.is_null() || high.is_null() {
            return Err(null("low or high"));
        }
        let (lo, hi) = tau_confidence_interval(tau, n, level)
            .map_err(|e| Failure(EaStatus::StatsError, e.to_string()))?;
        *low = lo;
        *high = hi;
        Ok(())
    })
}
