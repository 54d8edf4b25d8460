//! C interface to `percept-mc`.
//!
//! Objects are opaque handles created by `*_from_*` functions and released
//! by the matching `*_free`. Every fallible function returns a
//! [`PmcStatus`] and writes its result through an out-pointer; on failure
//! [`pmc_last_error_message`] describes the error on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use percept_mc::abstraction::{build_abstraction, estimate_beta, ConfusionMatrix, PerceptionAbstraction};
use percept_mc::dtmc::Dtmc;
use percept_mc::lang::{expand, parse_bindings, parse_model, parse_property};
use percept_mc::modelcheck::{check, SolverMode};
use percept_mc::sim::monte_carlo;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PmcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    AbstractionError = 4,
    ModelError = 5,
    CheckError = 6,
    OutOfRange = 7,
    SimulationError = 8,
    Panic = 9,
}

/// Normalized confusion matrix.
pub struct PmcAbstraction {
    inner: PerceptionAbstraction,
}

/// Expanded model.
pub struct PmcModel {
    inner: Dtmc,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn fail(status: PmcStatus, msg: impl std::fmt::Display) -> PmcStatus {
    set_error(msg.to_string());
    status
}

fn guarded(f: impl FnOnce() -> PmcStatus) -> PmcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(PmcStatus::Panic, "internal error"),
    }
}

unsafe fn text<'a>(p: *const c_char) -> Result<&'a str, PmcStatus> {
    if p.is_null() {
        return Err(fail(PmcStatus::NullPointer, "null string argument"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(PmcStatus::InvalidUtf8, "string argument is not UTF-8"))
}

macro_rules! try_status {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

macro_rules! non_null {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            return fail(PmcStatus::NullPointer, concat!("`", stringify!($p), "` is null"));
        })+
    };
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pmc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread. Valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn pmc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Builds an abstraction from confusion-matrix CSV text.
///
/// # Safety
/// `csv` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pmc_abstraction_from_csv(csv: *const c_char, out: *mut *mut PmcAbstraction) -> PmcStatus {
    guarded(|| {
        non_null!(out);
        let src = try_status!(text(csv));
        let built = ConfusionMatrix::from_csv(src).and_then(|m| build_abstraction(&m));
        match built {
            Ok(a) => {
                *out = Box::into_raw(Box::new(PmcAbstraction { inner: a }));
                PmcStatus::Ok
            }
            Err(e) => fail(PmcStatus::AbstractionError, e),
        }
    })
}

/// # Safety
/// `a` must come from [`pmc_abstraction_from_csv`]; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn pmc_abstraction_num_labels(a: *const PmcAbstraction, out: *mut usize) -> PmcStatus {
    guarded(|| {
        non_null!(a, out);
        *out = (*a).inner.space().len();
        PmcStatus::Ok
    })
}

/// Probability of estimating column `col` when the true state is row `row`.
///
/// # Safety
/// `a` must come from [`pmc_abstraction_from_csv`]; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn pmc_abstraction_prob(
    a: *const PmcAbstraction,
    row: usize,
    col: usize,
    out: *mut f64,
) -> PmcStatus {
    guarded(|| {
        non_null!(a, out);
        let k = (*a).inner.space().len();
        if row >= k || col >= k {
            return fail(PmcStatus::OutOfRange, format!("index ({row}, {col}) outside a {k}x{k} matrix"));
        }
        *out = (*a).inner.prob_f64(row, col);
        PmcStatus::Ok
    })
}

/// # Safety
/// `a` must come from [`pmc_abstraction_from_csv`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pmc_abstraction_free(a: *mut PmcAbstraction) {
    if !a.is_null() {
        drop(Box::from_raw(a));
    }
}

/// Parses and expands a model. `bindings` may be null or a list such as
/// `"N=3,M=2"`.
///
/// # Safety
/// String arguments must be NUL-terminated; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn pmc_model_from_source(
    source: *const c_char,
    bindings: *const c_char,
    out: *mut *mut PmcModel,
) -> PmcStatus {
    guarded(|| {
        non_null!(out);
        let src = try_status!(text(source));
        let binds = if bindings.is_null() {
            Default::default()
        } else {
            let b = try_status!(text(bindings));
            let parts: Vec<&str> = if b.trim().is_empty() { Vec::new() } else { vec![b] };
            try_status!(parse_bindings(&parts).map_err(|e| fail(PmcStatus::ParseError, e)))
        };
        let ast = try_status!(parse_model(src).map_err(|e| fail(PmcStatus::ParseError, e)));
        match expand(&ast, &binds) {
            Ok(m) => {
                *out = Box::into_raw(Box::new(PmcModel { inner: m }));
                PmcStatus::Ok
            }
            Err(e) => fail(PmcStatus::ModelError, e),
        }
    })
}

/// # Safety
/// `m` must come from [`pmc_model_from_source`]; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn pmc_model_num_states(m: *const PmcModel, out: *mut usize) -> PmcStatus {
    guarded(|| {
        non_null!(m, out);
        *out = (*m).inner.num_states();
        PmcStatus::Ok
    })
}

/// Probability of `property` (e.g. `P=? [ F s=2 ]`) from the initial state.
///
/// # Safety
/// `m` must come from [`pmc_model_from_source`]; `property` must be
/// NUL-terminated; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn pmc_model_check(m: *const PmcModel, property: *const c_char, out: *mut f64) -> PmcStatus {
    guarded(|| {
        non_null!(m, out);
        let p = try_status!(text(property));
        let prop = try_status!(parse_property(p).map_err(|e| fail(PmcStatus::ParseError, e)));
        match check(&(*m).inner, &prop, SolverMode::Auto) {
            Ok(r) => {
                *out = r.at_initial();
                PmcStatus::Ok
            }
            Err(e) => fail(PmcStatus::CheckError, e),
        }
    })
}

/// Monte Carlo estimate of an unbounded `property`.
///
/// # Safety
/// As for [`pmc_model_check`]; both out-pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn pmc_model_simulate(
    m: *const PmcModel,
    property: *const c_char,
    trials: u64,
    seed: u64,
    mean: *mut f64,
    stderr: *mut f64,
) -> PmcStatus {
    guarded(|| {
        non_null!(m, mean, stderr);
        let p = try_status!(text(property));
        let prop = try_status!(parse_property(p).map_err(|e| fail(PmcStatus::ParseError, e)));
        if prop.bound.is_some() {
            return fail(PmcStatus::SimulationError, "simulation supports unbounded properties only");
        }
        match monte_carlo(&(*m).inner, &prop.target, trials, seed) {
            Ok(e) => {
                *mean = e.mean;
                *stderr = e.stderr;
                PmcStatus::Ok
            }
            Err(e) => fail(PmcStatus::SimulationError, e),
        }
    })
}

/// # Safety
/// `m` must come from [`pmc_model_from_source`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pmc_model_free(m: *mut PmcModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Pass rate `passed / total` of the run-time check.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn pmc_beta(passed: u64, total: u64, out: *mut f64) -> PmcStatus {
    guarded(|| {
        non_null!(out);
        match estimate_beta(total, passed) {
            Ok(g) => {
                *out = g.beta_f64();
                PmcStatus::Ok
            }
            Err(e) => fail(PmcStatus::AbstractionError, e),
        }
    })
}
