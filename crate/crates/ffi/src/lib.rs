//! C interface to `mbm-core`.
//!
//! Conventions:
//! - Every fallible function returns an [`MbmStatus`] and writes its result
//!   through an out-pointer. The out-pointer is untouched on failure.
//! - On failure a message is kept per thread and can be read with
//!   [`mbm_last_error_message`].
//! - Objects are opaque handles created by `mbm_*_new`-style functions and
//!   released with the matching `*_free`. Freeing NULL is a no-op.
//! - Panics never cross the boundary; they surface as `MBM_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use mbm_core::config::ConfigFile;
use mbm_core::drivers::{
    build_kernel_weights, c1, c2, c3, molchan_kernel, CholeskySampler, GaussianPathSampler, MovingAverageSampler,
};
use mbm_core::payoff::{make_abs_payoff, make_call_payoff, make_quadratic_payoff_on};
use mbm_core::theory::{leading_constant, leading_constant_inner, phi, rate_exponents};
use mbm_core::{run_convergence, ConvexPayoff, Error, HurstFunction, SamplePath};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MbmStatus {
    Ok = 0,
    NullPointer = 1,
    Domain = 2,
    Quadrature = 3,
    Factorization = 4,
    Assumption = 5,
    Invariant = 6,
    Degenerate = 7,
    Config = 8,
    Io = 9,
    InvalidUtf8 = 10,
    BufferSize = 11,
    Panic = 12,
}

impl From<&Error> for MbmStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Domain(_) => MbmStatus::Domain,
            Error::Quadrature(_) => MbmStatus::Quadrature,
            Error::Factorization(_) => MbmStatus::Factorization,
            Error::Assumption(_) => MbmStatus::Assumption,
            Error::Invariant(_) => MbmStatus::Invariant,
            Error::Degenerate(_) => MbmStatus::Degenerate,
            Error::Config(_) => MbmStatus::Config,
            Error::Io(_) => MbmStatus::Io,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MbmSimulator {
    Volterra = 0,
    Cholesky = 1,
    MovingAverage = 2,
}

/// Mirror of the core `RateExponents`.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MbmRateExponents {
    pub h_tilde: f64,
    pub leading_exponent: f64,
    pub remainder_exponent: f64,
    pub lower_bound_applicable: bool,
    pub lower_leading_exponent: f64,
}

/// Opaque Hurst function.
pub struct MbmHurst(HurstFunction);

/// Opaque convex payoff.
pub struct MbmPayoff(ConvexPayoff);

/// Opaque path sampler for a fixed grid size.
pub struct MbmSampler(GaussianPathSampler);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Failure(MbmStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(MbmStatus::from(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(MbmStatus::NullPointer, format!("{what} is NULL"))
}

/// Runs `f`, turning errors and panics into a status plus a stored message.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> MbmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MbmStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(&format!("panic: {msg}"));
            MbmStatus::Panic
        }
    }
}

/// Writes `value` through `out`, which the caller guarantees is valid if non-NULL.
unsafe fn put<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    out.write(value);
    Ok(())
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn boxed<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    put(out, Box::into_raw(Box::new(value)))
}

/// Message of the last failed call on this thread, or "" if none. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn mbm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mbm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mbm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// `φ(a) = E[Y 1{Y > a}]` for standard normal `Y`, which equals the normal density at `a`.
#[no_mangle]
pub extern "C" fn mbm_phi(a: f64) -> f64 {
    phi(a)
}

/// Moving-average normalizing constant `C1(H)`.
///
/// # Safety
/// `out` must be NULL or valid for writing one `double`.
#[no_mangle]
pub unsafe extern "C" fn mbm_c1(h: f64, out: *mut f64) -> MbmStatus {
    guard(|| put(out, c1(h)?))
}

/// Volterra kernel constant `C2(H)`.
///
/// # Safety
/// `out` must be NULL or valid for writing one `double`.
#[no_mangle]
pub unsafe extern "C" fn mbm_c2(h: f64, out: *mut f64) -> MbmStatus {
    guard(|| put(out, c2(h)?))
}

/// # Safety
/// `out` must be NULL or valid for writing one `double`.
#[no_mangle]
pub unsafe extern "C" fn mbm_c3(h: f64, out: *mut f64) -> MbmStatus {
    guard(|| put(out, c3(h)?))
}

/// Volterra kernel `K_H(t, s)` for `0 < s < t`.
///
/// # Safety
/// `out` must be NULL or valid for writing one `double`.
#[no_mangle]
pub unsafe extern "C" fn mbm_molchan_kernel(h: f64, t: f64, s: f64, out: *mut f64) -> MbmStatus {
    guard(|| put(out, molchan_kernel(h, t, s)?))
}

/// # Safety
/// `out` must be NULL or valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn mbm_hurst_constant(h: f64, out: *mut *mut MbmHurst) -> MbmStatus {
    guard(|| boxed(out, MbmHurst(HurstFunction::constant(h)?)))
}

/// `H_t = h0 + slope t`.
///
/// # Safety
/// `out` must be NULL or valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn mbm_hurst_affine(h0: f64, slope: f64, out: *mut *mut MbmHurst) -> MbmStatus {
    guard(|| boxed(out, MbmHurst(HurstFunction::affine(h0, slope)?)))
}

/// `H_t = h0 + h1 sin(2 pi t + phase)`.
///
/// # Safety
/// `out` must be NULL or valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn mbm_hurst_sin(h0: f64, h1: f64, phase: f64, out: *mut *mut MbmHurst) -> MbmStatus {
    guard(|| boxed(out, MbmHurst(HurstFunction::sinusoidal(h0, h1, phase)?)))
}

/// # Safety
/// `out` must be NULL or valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn mbm_hurst_logistic(
    lo: f64,
    hi: f64,
    center: f64,
    steepness: f64,
    out: *mut *mut MbmHurst,
) -> MbmStatus {
    guard(|| boxed(out, MbmHurst(HurstFunction::logistic(lo, hi, center, steepness)?)))
}

/// Re-declares the Hölder exponent of `hurst` in place.
///
/// # Safety
/// `hurst` must be NULL or a live handle not used concurrently.
#[no_mangle]
pub unsafe extern "C" fn mbm_hurst_set_alpha(hurst: *mut MbmHurst, alpha: f64) -> MbmStatus {
    guard(|| {
        let h = hurst.as_mut().ok_or_else(|| null("hurst"))?;
        h.0 = h.0.clone().with_alpha(alpha)?;
        Ok(())
    })
}

/// # Safety
/// `hurst` must be NULL or a live handle; `out` NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn mbm_hurst_evaluate(hurst: *const MbmHurst, t: f64, out: *mut f64) -> MbmStatus {
    guard(|| {
        let v = borrow(hurst, "hurst")?.0.evaluate(t)?;
        put(out, v)
    })
}

/// # Safety
/// `hurst` must be NULL or a handle from this library, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mbm_hurst_free(hurst: *mut MbmHurst) {
    if !hurst.is_null() {
        drop(Box::from_raw(hurst));
    }
}

/// `(x - a)^+`.
///
/// # Safety
/// `out` must be NULL or valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn mbm_payoff_call(a: f64, out: *mut *mut MbmPayoff) -> MbmStatus {
    guard(|| boxed(out, MbmPayoff(make_call_payoff(a))))
}

/// `|x - a|`.
///
/// # Safety
/// `out` must be NULL or valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn mbm_payoff_abs(a: f64, out: *mut *mut MbmPayoff) -> MbmStatus {
    guard(|| boxed(out, MbmPayoff(make_abs_payoff(a))))
}

/// `x^2 / 2` with its second-derivative measure restricted to `[lo, hi]`.
///
/// # Safety
/// `out` must be NULL or valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn mbm_payoff_quadratic(lo: f64, hi: f64, out: *mut *mut MbmPayoff) -> MbmStatus {
    guard(|| boxed(out, MbmPayoff(make_quadratic_payoff_on(lo, hi)?)))
}

/// `ψ(x)`; NaN if `payoff` is NULL.
///
/// # Safety
/// `payoff` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mbm_payoff_psi(payoff: *const MbmPayoff, x: f64) -> f64 {
    payoff.as_ref().map_or(f64::NAN, |p| p.0.psi(x))
}

/// # Safety
/// `payoff` must be NULL or a handle from this library, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mbm_payoff_free(payoff: *mut MbmPayoff) {
    if !payoff.is_null() {
        drop(Box::from_raw(payoff));
    }
}

/// Exact integral minus Riemann sum along one path of `len` values starting at 0.
///
/// # Safety
/// `values` must point to `len` readable doubles; other pointers as usual.
#[no_mangle]
pub unsafe extern "C" fn mbm_discretization_gap(
    payoff: *const MbmPayoff,
    values: *const f64,
    len: usize,
    out: *mut f64,
) -> MbmStatus {
    guard(|| {
        let p = borrow(payoff, "payoff")?;
        if values.is_null() {
            return Err(null("values"));
        }
        let path = SamplePath::from_values(std::slice::from_raw_parts(values, len).to_vec())?;
        let gap = mbm_core::payoff::discretization_gap(&path, &p.0)?;
        put(out, gap)
    })
}

/// `I(a) = ∫_0^1 s^{-H_s} φ(a / s^{H_s}) ds`.
///
/// # Safety
/// `hurst` must be NULL or a live handle; `out` NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn mbm_leading_constant_inner(
    hurst: *const MbmHurst,
    a: f64,
    rel_tol: f64,
    out: *mut f64,
) -> MbmStatus {
    guard(|| {
        let v = leading_constant_inner(&borrow(hurst, "hurst")?.0, a, rel_tol)?;
        put(out, v)
    })
}

/// `∫ I(a) μ(da)` for the payoff's second-derivative measure `μ`.
///
/// # Safety
/// Handles must be NULL or live; `out` NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn mbm_leading_constant(
    payoff: *const MbmPayoff,
    hurst: *const MbmHurst,
    rel_tol: f64,
    out: *mut f64,
) -> MbmStatus {
    guard(|| {
        let v = leading_constant(&borrow(payoff, "payoff")?.0, &borrow(hurst, "hurst")?.0, rel_tol)?;
        put(out, v)
    })
}

/// # Safety
/// `hurst` must be NULL or a live handle; `out` NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn mbm_rate_exponents(
    hurst: *const MbmHurst,
    delta: f64,
    out: *mut MbmRateExponents,
) -> MbmStatus {
    guard(|| {
        let r = rate_exponents(&borrow(hurst, "hurst")?.0, delta)?;
        put(
            out,
            MbmRateExponents {
                h_tilde: r.h_tilde,
                leading_exponent: r.leading_exponent,
                remainder_exponent: r.remainder_exponent,
                lower_bound_applicable: r.lower_bound_applicable,
                lower_leading_exponent: r.lower_leading_exponent,
            },
        )
    })
}

/// Builds a sampler for `n` intervals. `oversample` applies to the Volterra
/// and moving-average simulators, `truncation` to the moving average only.
///
/// # Safety
/// `hurst` must be NULL or a live handle; `out` NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn mbm_sampler_new(
    hurst: *const MbmHurst,
    kind: MbmSimulator,
    n: usize,
    oversample: usize,
    truncation: f64,
    out: *mut *mut MbmSampler,
) -> MbmStatus {
    guard(|| {
        let h = &borrow(hurst, "hurst")?.0;
        let sampler = match kind {
            MbmSimulator::Volterra => build_kernel_weights(h, n, oversample)?.into_sampler(),
            MbmSimulator::Cholesky => CholeskySampler::new(h, n)?.into_sampler(),
            MbmSimulator::MovingAverage => {
                MovingAverageSampler::with_oversample(h, n, truncation, oversample)?.into_sampler()
            }
        };
        boxed(out, MbmSampler(sampler))
    })
}

/// Number of intervals; 0 if `sampler` is NULL.
///
/// # Safety
/// `sampler` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mbm_sampler_n(sampler: *const MbmSampler) -> usize {
    sampler.as_ref().map_or(0, |s| s.0.n())
}

/// Writes path `path_index` of the stream seeded by `seed` into `out[0..=n]`.
/// The same `(seed, n, path_index)` always yields the same path.
///
/// # Safety
/// `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn mbm_sampler_sample(
    sampler: *const MbmSampler,
    seed: u64,
    path_index: u64,
    out: *mut f64,
    len: usize,
) -> MbmStatus {
    guard(|| {
        let s = &borrow(sampler, "sampler")?.0;
        if out.is_null() {
            return Err(null("output buffer"));
        }
        if len != s.n() + 1 {
            return Err(Failure(MbmStatus::BufferSize, format!("buffer holds {len} values, path has {}", s.n() + 1)));
        }
        let path = s.sample_seeded(seed, path_index);
        ptr::copy_nonoverlapping(path.values().as_ptr(), out, len);
        Ok(())
    })
}

/// # Safety
/// `sampler` must be NULL or a handle from this library, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mbm_sampler_free(sampler: *mut MbmSampler) {
    if !sampler.is_null() {
        drop(Box::from_raw(sampler));
    }
}

/// Runs the convergence study described by the TOML text `config` and returns
/// the report as JSON in `*out_json` (free with [`mbm_string_free`]).
/// `threads = 0` keeps the default pool. `*out_passed` receives the overall
/// verdict; a failing verdict still returns `MBM_STATUS_OK`.
///
/// # Safety
/// `config` must be a NUL-terminated string; out-pointers NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn mbm_converge_toml(
    config: *const c_char,
    threads: usize,
    out_json: *mut *mut c_char,
    out_passed: *mut bool,
) -> MbmStatus {
    guard(|| {
        if config.is_null() {
            return Err(null("config"));
        }
        if out_json.is_null() || out_passed.is_null() {
            return Err(null("output pointer"));
        }
        let text = CStr::from_ptr(config)
            .to_str()
            .map_err(|e| Failure(MbmStatus::InvalidUtf8, format!("config is not UTF-8: {e}")))?;
        let mut exp = ConfigFile::parse(text)?.experiment_config()?;
        if threads > 0 {
            exp.threads = Some(threads);
        }
        let report = run_convergence(&exp)?;
        let json = CString::new(report.to_json()).expect("JSON has no NUL bytes");
        put(out_passed, report.passed())?;
        put(out_json, json.into_raw())
    })
}
