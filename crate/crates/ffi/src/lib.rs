//! C ABI over the exact (rational) operator API and the scenario runner.
//!
//! Every function returns an [`OrbitlabStatus`]; on failure the message is kept
//! per thread and read with [`orbitlab_last_error`]. Strings handed out by the
//! library are released with [`orbitlab_string_free`], operators with
//! [`orbitlab_operator_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use orbitlab::finite_rank::{self, FiniteRankOperator};
use orbitlab::harness;
use orbitlab::{Error, Rational, SparseVector};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrbitlabStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Schema = 4,
    InvalidInput = 5,
    Singular = 6,
    BudgetExceeded = 7,
    NotPBounded = 8,
    NotInSpan = 9,
    Exhausted = 10,
    NotFound = 11,
    /// Any other documented failure of the core library.
    Failed = 12,
    Panic = 13,
}

/// Opaque handle to a finite-rank operator `base + Σ f⊗v` over exact rationals.
pub struct OrbitlabOperator {
    inner: FiniteRankOperator<Rational>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(err: &Error) -> OrbitlabStatus {
    match err {
        Error::Parse(_) => OrbitlabStatus::Parse,
        Error::Schema { .. } => OrbitlabStatus::Schema,
        Error::InvalidInput(_) => OrbitlabStatus::InvalidInput,
        Error::Singular(_) => OrbitlabStatus::Singular,
        Error::BudgetExceeded { .. } => OrbitlabStatus::BudgetExceeded,
        Error::NotPBounded { .. } => OrbitlabStatus::NotPBounded,
        Error::NotInSpan => OrbitlabStatus::NotInSpan,
        Error::Exhausted(_) => OrbitlabStatus::Exhausted,
        Error::NotFound { .. } => OrbitlabStatus::NotFound,
        Error::StageFailed { source, .. } => status_of(source),
        _ => OrbitlabStatus::Failed,
    }
}

struct Fail(OrbitlabStatus, String);

impl From<Error> for Fail {
    fn from(err: Error) -> Self {
        Fail(status_of(&err), format!("{}: {err}", err.code_name()))
    }
}

/// Runs `body`, converting errors and panics into a status plus last-error message.
fn guard(body: impl FnOnce() -> Result<(), Fail>) -> OrbitlabStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => OrbitlabStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            OrbitlabStatus::Panic
        }
    }
}

unsafe fn read_str<'a>(s: *const c_char) -> Result<&'a str, Fail> {
    if s.is_null() {
        return Err(Fail(OrbitlabStatus::NullPointer, "null string argument".into()));
    }
    CStr::from_ptr(s).to_str().map_err(|e| Fail(OrbitlabStatus::InvalidUtf8, e.to_string()))
}

unsafe fn operator<'a>(op: *const OrbitlabOperator) -> Result<&'a FiniteRankOperator<Rational>, Fail> {
    op.as_ref()
        .map(|o| &o.inner)
        .ok_or_else(|| Fail(OrbitlabStatus::NullPointer, "null operator handle".into()))
}

fn check_out<T>(out: *mut T) -> Result<(), Fail> {
    if out.is_null() {
        Err(Fail(OrbitlabStatus::NullPointer, "null output pointer".into()))
    } else {
        Ok(())
    }
}

fn c_string(s: String) -> Result<*mut c_char, Fail> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|e| Fail(OrbitlabStatus::Failed, e.to_string()))
}

fn parse<T: serde::de::DeserializeOwned>(text: &str) -> Result<T, Fail> {
    serde_json::from_str(text).map_err(|e| Fail(OrbitlabStatus::Parse, e.to_string()))
}

fn hand_out(out: *mut *mut OrbitlabOperator, inner: FiniteRankOperator<Rational>) {
    let boxed = Box::new(OrbitlabOperator { inner });
    // SAFETY: `out` was checked non-null by the caller of this helper.
    unsafe { *out = Box::into_raw(boxed) };
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next call into the library from the same thread; do not free.
#[no_mangle]
pub extern "C" fn orbitlab_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn orbitlab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses `{"base": "identity"|"zero", "terms": [{"f": [...], "v": [...]}]}`.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn orbitlab_operator_from_json(
    json: *const c_char,
    out: *mut *mut OrbitlabOperator,
) -> OrbitlabStatus {
    guard(|| {
        check_out(out)?;
        let op: FiniteRankOperator<Rational> = parse(read_str(json)?)?;
        hand_out(out, op);
        Ok(())
    })
}

/// # Safety
/// `op` must be a live handle; `out` must be writable. Free the result with
/// [`orbitlab_string_free`].
#[no_mangle]
pub unsafe extern "C" fn orbitlab_operator_to_json(op: *const OrbitlabOperator, out: *mut *mut c_char) -> OrbitlabStatus {
    guard(|| {
        check_out(out)?;
        let text = serde_json::to_string(operator(op)?).map_err(|e| Fail(OrbitlabStatus::Failed, e.to_string()))?;
        *out = c_string(text)?;
        Ok(())
    })
}

/// Applies the operator to a vector given as a JSON list of `"index:value"` pairs;
/// the image comes back in the same format.
///
/// # Safety
/// `op` must be a live handle, `vector_json` NUL-terminated, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn orbitlab_operator_apply(
    op: *const OrbitlabOperator,
    vector_json: *const c_char,
    out: *mut *mut c_char,
) -> OrbitlabStatus {
    guard(|| {
        check_out(out)?;
        let t = operator(op)?;
        let x: SparseVector<Rational> = parse(read_str(vector_json)?)?;
        let text = serde_json::to_string(&t.apply(&x)).map_err(|e| Fail(OrbitlabStatus::Failed, e.to_string()))?;
        *out = c_string(text)?;
        Ok(())
    })
}

/// Exact inverse of an identity-based operator.
///
/// # Safety
/// `op` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn orbitlab_operator_invert(
    op: *const OrbitlabOperator,
    out: *mut *mut OrbitlabOperator,
) -> OrbitlabStatus {
    guard(|| {
        check_out(out)?;
        let inv = finite_rank::invert(operator(op)?)?;
        hand_out(out, inv);
        Ok(())
    })
}

/// `a ∘ b`.
///
/// # Safety
/// `a` and `b` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn orbitlab_operator_compose(
    a: *const OrbitlabOperator,
    b: *const OrbitlabOperator,
    out: *mut *mut OrbitlabOperator,
) -> OrbitlabStatus {
    guard(|| {
        check_out(out)?;
        let composed = finite_rank::compose(operator(a)?, operator(b)?);
        hand_out(out, composed);
        Ok(())
    })
}

/// # Safety
/// `op` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn orbitlab_operator_free(op: *mut OrbitlabOperator) {
    if !op.is_null() {
        drop(Box::from_raw(op));
    }
}

/// Runs one scenario document and writes the JSON report to `out`. `passed`,
/// when not NULL, receives whether every check of the report passed; a failing
/// check is not an error status.
///
/// # Safety
/// `scenario_json` must be NUL-terminated, `out` writable, `passed` NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn orbitlab_run_scenario(
    scenario_json: *const c_char,
    out: *mut *mut c_char,
    passed: *mut bool,
) -> OrbitlabStatus {
    guard(|| {
        check_out(out)?;
        let report = harness::run_scenario_json(read_str(scenario_json)?)?;
        if !passed.is_null() {
            *passed = report.passed();
        }
        *out = c_string(String::from_utf8_lossy(&harness::emit_report(&report, harness::Format::Json)).into_owned())?;
        Ok(())
    })
}

/// # Safety
/// `s` must be NULL or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn orbitlab_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
