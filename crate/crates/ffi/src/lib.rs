//! C interface to `sonc-core`.
//!
//! Polynomials live behind an opaque [`SoncPolynomial`] handle. Every call
//! returns a status code; on failure the message is available from
//! [`sonc_last_error`] on the same thread until the next failing call.
//! Panics never cross the boundary and surface as `SONC_ERR_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;
use std::time::Duration;

use sonc_core::bnb::{branch_and_bound, BnbOptions, NodeStrategy};
use sonc_core::bounds::{sage_bound, sonc_bound};
use sonc_core::error::Error;
use sonc_core::minima::sonc_min;
use sonc_core::orthants::{fork_bound, minimal_orthants, ForkMethod};
use sonc_core::poly::Polynomial;
use sonc_core::solver::{SolverStatus, DEFAULT_TOL};

pub const SONC_OK: i32 = 0;
pub const SONC_ERR_NULL: i32 = 1;
pub const SONC_ERR_PARSE: i32 = 2;
pub const SONC_ERR_INVALID: i32 = 3;
pub const SONC_ERR_DIMENSION: i32 = 4;
/// The output buffer is too small; the required size is still reported.
pub const SONC_ERR_BUFFER: i32 = 5;
pub const SONC_ERR_NUMERICAL: i32 = 6;
pub const SONC_ERR_PANIC: i32 = 7;

pub const SONC_METHOD_SONC: i32 = 0;
pub const SONC_METHOD_SAGE: i32 = 1;
pub const SONC_METHOD_FORK: i32 = 2;
pub const SONC_METHOD_BNB: i32 = 3;

pub const SONC_STRATEGY_WORST: i32 = 0;
pub const SONC_STRATEGY_DFS: i32 = 1;

pub const SONC_STATUS_OPTIMAL: i32 = 0;
pub const SONC_STATUS_INFEASIBLE: i32 = 1;
pub const SONC_STATUS_UNBOUNDED: i32 = 2;
pub const SONC_STATUS_NUMERICAL_FAILURE: i32 = 3;

/// Opaque polynomial handle.
pub struct SoncPolynomial(Polynomial);

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SoncBoundOptions {
    /// One of the `SONC_METHOD_*` constants.
    pub method: i32,
    /// One of the `SONC_STRATEGY_*` constants (branch-and-bound only).
    pub strategy: i32,
    pub sparse: bool,
    pub eps: f64,
    /// Seconds; zero or negative disables the limit.
    pub timeout: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SoncBoundResult {
    /// `-INFINITY` when no bound could be certified.
    pub lower_bound: f64,
    /// Best value found by branch-and-bound, `INFINITY` for other methods.
    pub best_value: f64,
    /// One of the `SONC_STATUS_*` constants.
    pub status: i32,
    pub nodes_expanded: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(i32, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Parse { .. } | Error::Json(_) => SONC_ERR_PARSE,
            Error::DimensionMismatch { .. } => SONC_ERR_DIMENSION,
            Error::Numerical(_) | Error::UnboundedRelaxation(_) => SONC_ERR_NUMERICAL,
            _ => SONC_ERR_INVALID,
        };
        Failure(code, e.to_string())
    }
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

/// Runs `f`, recording any failure or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> i32 {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SONC_OK,
        Ok(Err(Failure(code, msg))) => {
            set_error(msg);
            code
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            SONC_ERR_PANIC
        }
    }
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(Failure(SONC_ERR_NULL, format!("{name} is null")))
    } else {
        Ok(())
    }
}

/// # Safety
/// `p` must be null or a handle from [`sonc_polynomial_parse`] that has not
/// been freed.
unsafe fn poly<'a>(p: *const SoncPolynomial) -> Result<&'a Polynomial, Failure> {
    non_null(p, "polynomial")?;
    Ok(&(*p).0)
}

fn status_code(s: SolverStatus) -> i32 {
    match s {
        SolverStatus::Optimal => SONC_STATUS_OPTIMAL,
        SolverStatus::Infeasible => SONC_STATUS_INFEASIBLE,
        SolverStatus::Unbounded => SONC_STATUS_UNBOUNDED,
        SolverStatus::NumericalFailure => SONC_STATUS_NUMERICAL_FAILURE,
    }
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sonc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sonc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses the text grammar or the JSON form.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn sonc_polynomial_parse(text: *const c_char, out: *mut *mut SoncPolynomial) -> i32 {
    guard(|| {
        non_null(text, "text")?;
        non_null(out, "out")?;
        *out = ptr::null_mut();
        let s = CStr::from_ptr(text).to_str().map_err(|e| Failure(SONC_ERR_PARSE, format!("input is not UTF-8: {e}")))?;
        let p = Polynomial::from_text_or_json(s)?;
        *out = Box::into_raw(Box::new(SoncPolynomial(p)));
        Ok(())
    })
}

/// Releases a handle; null is ignored.
///
/// # Safety
/// `p` must be null or a live handle; it must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sonc_polynomial_free(p: *mut SoncPolynomial) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// # Safety
/// `p` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sonc_polynomial_nvars(p: *const SoncPolynomial, out: *mut usize) -> i32 {
    guard(|| {
        non_null(out, "out")?;
        *out = poly(p)?.nvars();
        Ok(())
    })
}

/// # Safety
/// `p` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sonc_polynomial_num_terms(p: *const SoncPolynomial, out: *mut usize) -> i32 {
    guard(|| {
        non_null(out, "out")?;
        *out = poly(p)?.num_terms();
        Ok(())
    })
}

/// Evaluates at `x[0..n]`.
///
/// # Safety
/// `x` must point to `n` doubles and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn sonc_polynomial_eval(p: *const SoncPolynomial, x: *const f64, n: usize, out: *mut f64) -> i32 {
    guard(|| {
        non_null(x, "x")?;
        non_null(out, "out")?;
        *out = poly(p)?.evaluate(slice::from_raw_parts(x, n))?;
        Ok(())
    })
}

/// Text form of the polynomial into `buf`. `len` receives the byte count
/// without the terminator; when `cap` is too small nothing is written and
/// `SONC_ERR_BUFFER` is returned.
///
/// # Safety
/// `buf` must be writable for `cap` bytes (or null with `cap == 0`) and
/// `len` writable.
#[no_mangle]
pub unsafe extern "C" fn sonc_polynomial_to_string(p: *const SoncPolynomial, buf: *mut c_char, cap: usize, len: *mut usize) -> i32 {
    guard(|| {
        non_null(len, "len")?;
        let s = poly(p)?.to_string();
        *len = s.len();
        if cap < s.len() + 1 {
            return Err(Failure(SONC_ERR_BUFFER, format!("need {} bytes", s.len() + 1)));
        }
        non_null(buf, "buf")?;
        ptr::copy_nonoverlapping(s.as_ptr().cast(), buf, s.len());
        *buf.add(s.len()) = 0;
        Ok(())
    })
}

/// Defaults: SONC, worst-first, dense tree, `eps = 2^-23`, no time limit.
#[no_mangle]
pub extern "C" fn sonc_bound_options_default() -> SoncBoundOptions {
    SoncBoundOptions { method: SONC_METHOD_SONC, strategy: SONC_STRATEGY_WORST, sparse: false, eps: DEFAULT_TOL, timeout: 0.0 }
}

/// Certified lower bound. Null `opts` uses the defaults. A `-INFINITY`
/// bound is a result, not an error.
///
/// # Safety
/// `p` must be a live handle, `opts` null or readable, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sonc_lower_bound(p: *const SoncPolynomial, opts: *const SoncBoundOptions, out: *mut SoncBoundResult) -> i32 {
    guard(|| {
        non_null(out, "out")?;
        let p = poly(p)?;
        let o = if opts.is_null() { sonc_bound_options_default() } else { *opts };
        let r = match o.method {
            SONC_METHOD_SONC | SONC_METHOD_SAGE => {
                let b = if o.method == SONC_METHOD_SONC { sonc_bound(p) } else { sage_bound(p) };
                SoncBoundResult { lower_bound: b.lower_bound, best_value: f64::INFINITY, status: status_code(b.status), nodes_expanded: 1 }
            }
            SONC_METHOD_FORK => {
                let f = fork_bound(p, ForkMethod::Both)?;
                SoncBoundResult {
                    lower_bound: f.lower_bound,
                    best_value: f64::INFINITY,
                    status: status_code(f.status),
                    nodes_expanded: f.orthants.len(),
                }
            }
            SONC_METHOD_BNB => {
                let strategy = match o.strategy {
                    SONC_STRATEGY_WORST => NodeStrategy::WorstFirst,
                    SONC_STRATEGY_DFS => NodeStrategy::Dfs,
                    s => return Err(Failure(SONC_ERR_INVALID, format!("unknown strategy {s}"))),
                };
                if !(o.eps > 0.0 && o.eps.is_finite()) {
                    return Err(Failure(SONC_ERR_INVALID, format!("eps must be positive, got {}", o.eps)));
                }
                let timeout = (o.timeout > 0.0).then(|| Duration::try_from_secs_f64(o.timeout)).transpose();
                let timeout = timeout.map_err(|_| Failure(SONC_ERR_INVALID, format!("invalid timeout {}", o.timeout)))?;
                let opts = BnbOptions { strategy, sparse: o.sparse, eps: o.eps, timeout, ..BnbOptions::default() };
                let b = branch_and_bound(p, &opts)?;
                let status = if b.lower_bound.is_finite() { SONC_STATUS_OPTIMAL } else { SONC_STATUS_NUMERICAL_FAILURE };
                SoncBoundResult { lower_bound: b.lower_bound, best_value: b.best_value, status, nodes_expanded: b.nodes_expanded }
            }
            m => return Err(Failure(SONC_ERR_INVALID, format!("unknown method {m}"))),
        };
        *out = r;
        Ok(())
    })
}

/// Candidate minimizer from the circuit heuristic; `x` receives `n`
/// coordinates, which must equal the variable count.
///
/// # Safety
/// `x` must be writable for `n` doubles and `value` writable.
#[no_mangle]
pub unsafe extern "C" fn sonc_local_min(p: *const SoncPolynomial, x: *mut f64, n: usize, value: *mut f64) -> i32 {
    guard(|| {
        non_null(x, "x")?;
        non_null(value, "value")?;
        let p = poly(p)?;
        if n != p.nvars() {
            return Err(Failure(SONC_ERR_DIMENSION, format!("expected {} coordinates, got {n}", p.nvars())));
        }
        let r = sonc_min(p);
        slice::from_raw_parts_mut(x, n).copy_from_slice(&r.candidate);
        *value = r.value;
        Ok(())
    })
}

/// Minimal orthants as rows of `n` signs (`+1`/`-1`) in `signs`. `count`
/// receives the number of orthants; when `cap < count * n` nothing is
/// written and `SONC_ERR_BUFFER` is returned.
///
/// # Safety
/// `signs` must be writable for `cap` bytes (or null with `cap == 0`) and
/// `count` writable.
#[no_mangle]
pub unsafe extern "C" fn sonc_minimal_orthants(p: *const SoncPolynomial, signs: *mut i8, cap: usize, count: *mut usize) -> i32 {
    guard(|| {
        non_null(count, "count")?;
        let p = poly(p)?;
        let list = minimal_orthants(p)?;
        *count = list.len();
        let n = p.nvars();
        if cap < list.len() * n {
            return Err(Failure(SONC_ERR_BUFFER, format!("need {} entries", list.len() * n)));
        }
        if list.is_empty() {
            return Ok(());
        }
        non_null(signs, "signs")?;
        let dst = slice::from_raw_parts_mut(signs, list.len() * n);
        for (row, e) in dst.chunks_mut(n).zip(&list) {
            row.copy_from_slice(e.sign_vector().entries());
        }
        Ok(())
    })
}
