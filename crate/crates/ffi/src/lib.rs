//! C ABI for sidlab.
//!
//! Every entry point returns a [`SidStatus`]. On failure the message is kept
//! per thread and can be read with [`sid_last_error_message`]. Handles are
//! opaque and must be released with their `_free` function. Strings returned
//! through out-parameters are owned by the caller and released with
//! [`sid_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use sidlab::action::{compute_h, minimize_action, MinimizeOptions};
use sidlab::dynamics::{simulate_sid, SimOptions};
use sidlab::geometry::DomainSpec;
use sidlab::harness::{bvp_mean_exit_1d, run_exit_campaign, ExperimentConfig};
use sidlab::landscape::Landscape;
use sidlab::measures::ExtendedInit;
use sidlab::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SidStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    DimensionMismatch = 4,
    UnknownPreset = 5,
    Domain = 6,
    Numerical = 7,
    Config = 8,
    Io = 9,
    Panic = 10,
}

impl From<&Error> for SidStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::DimensionMismatch { .. } => SidStatus::DimensionMismatch,
            Error::UnknownPreset(_) => SidStatus::UnknownPreset,
            Error::InvalidArgument(_) | Error::PathMismatch(_) => SidStatus::InvalidArgument,
            Error::DegenerateRegion(_)
            | Error::OutsideDomain
            | Error::UnboundedBoundary
            | Error::DegenerateNormal
            | Error::LevelSetNotFound(_) => SidStatus::Domain,
            Error::NonFinite { .. }
            | Error::NoConvergence(_)
            | Error::SingularSystem(_)
            | Error::EmptyRecords(_)
            | Error::DegenerateFit(_) => SidStatus::Numerical,
            Error::Config(_) | Error::Json(_) => SidStatus::Config,
            Error::Io(_) | Error::Csv(_) => SidStatus::Io,
        }
    }
}

/// Opaque landscape handle.
pub struct SidLandscape(Landscape);

/// Opaque domain handle.
pub struct SidDomain(DomainSpec);

/// Outcome of one simulated trajectory.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SidExitRecord {
    /// exit time, or the horizon when censored
    pub exit_time: f64,
    pub censored: bool,
    pub steps: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Fail(SidStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail((&e).into(), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(SidStatus::NullPointer, format!("null pointer: {what}"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> SidStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            SidStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            SidStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail(SidStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn landscape_arg<'a>(p: *const SidLandscape) -> Result<&'a Landscape, Fail> {
    p.as_ref().map(|h| &h.0).ok_or_else(|| null("landscape"))
}

unsafe fn domain_arg<'a>(p: *const SidDomain) -> Result<&'a DomainSpec, Fail> {
    p.as_ref().map(|h| &h.0).ok_or_else(|| null("domain"))
}

fn to_c_string(s: String) -> Result<*mut c_char, Fail> {
    CString::new(s).map(CString::into_raw).map_err(|_| Fail(SidStatus::InvalidArgument, "string holds a NUL byte".into()))
}

/// Message of the last failed call on this thread, empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn sid_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sid_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. Null is a no-op.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn sid_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Builds a preset landscape such as `"dw"` or `"ou+gauss-attract(1)"`.
///
/// # Safety
/// `preset` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sid_landscape_new(preset: *const c_char, dim: usize, out: *mut *mut SidLandscape) -> SidStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let l = Landscape::preset(str_arg(preset, "preset")?, dim)?;
        *out = Box::into_raw(Box::new(SidLandscape(l)));
        Ok(())
    })
}

/// # Safety
/// `h` must come from [`sid_landscape_new`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn sid_landscape_free(h: *mut SidLandscape) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Dimension of the landscape, or 0 for a null handle.
///
/// # Safety
/// `h` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sid_landscape_dim(h: *const SidLandscape) -> usize {
    h.as_ref().map_or(0, |h| h.0.dim())
}

/// `V(x)` and `∇V(x)`; `grad` must hold `len` values.
///
/// # Safety
/// `x` and `grad` must point to `len` values; `value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sid_potential_eval(
    h: *const SidLandscape,
    x: *const f64,
    len: usize,
    value: *mut f64,
    grad: *mut f64,
) -> SidStatus {
    guard(|| {
        let l = landscape_arg(h)?;
        let (v, g) = l.potential_eval(slice_arg(x, len, "x")?)?;
        if grad.is_null() {
            return Err(null("grad"));
        }
        *out_arg(value, "value")? = v;
        std::slice::from_raw_parts_mut(grad, len).copy_from_slice(&g);
        Ok(())
    })
}

/// Parses a domain from JSON, e.g. `{"kind":"interval","lo":-1,"hi":1}`.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sid_domain_from_json(json: *const c_char, out: *mut *mut SidDomain) -> SidStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let d: DomainSpec = serde_json::from_str(str_arg(json, "json")?).map_err(Error::from)?;
        d.validate()?;
        *out = Box::into_raw(Box::new(SidDomain(d)));
        Ok(())
    })
}

/// # Safety
/// `h` must come from [`sid_domain_from_json`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn sid_domain_free(h: *mut SidDomain) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Whether `x` lies in the open domain.
///
/// # Safety
/// `x` must point to `len` values; `inside` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sid_domain_contains(
    h: *const SidDomain,
    x: *const f64,
    len: usize,
    inside: *mut bool,
) -> SidStatus {
    guard(|| {
        let d = domain_arg(h)?;
        let x = slice_arg(x, len, "x")?;
        if len != d.dim() {
            return Err(Error::DimensionMismatch { expected: d.dim(), got: len }.into());
        }
        *out_arg(inside, "inside")? = d.contains(x);
        Ok(())
    })
}

/// Barrier height `H = inf_{∂G} W_a` and a minimizer `z*` (`len` values).
///
/// # Safety
/// `a` and `z_star` must point to `len` values; `h_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sid_compute_barrier(
    landscape: *const SidLandscape,
    domain: *const SidDomain,
    a: *const f64,
    len: usize,
    n_boundary: usize,
    seed: u64,
    h_out: *mut f64,
    z_star: *mut f64,
) -> SidStatus {
    guard(|| {
        let l = landscape_arg(landscape)?;
        let d = domain_arg(domain)?;
        let b = compute_h(l, d, slice_arg(a, len, "a")?, n_boundary, seed)?;
        if z_star.is_null() {
            return Err(null("z_star"));
        }
        *out_arg(h_out, "h_out")? = b.h;
        std::slice::from_raw_parts_mut(z_star, len).copy_from_slice(&b.z_star);
        Ok(())
    })
}

/// Simulates one trajectory started at `x0` with `δ_{x0}` as initial
/// occupation. `exit_point` receives `len` values and is NaN when censored;
/// it may be null.
///
/// # Safety
/// `x0` must point to `len` values; `record` must be writable; `exit_point`
/// must be null or point to `len` writable values.
#[no_mangle]
pub unsafe extern "C" fn sid_simulate_exit(
    landscape: *const SidLandscape,
    domain: *const SidDomain,
    x0: *const f64,
    len: usize,
    sigma: f64,
    dt: f64,
    horizon: f64,
    seed: u64,
    record: *mut SidExitRecord,
    exit_point: *mut f64,
) -> SidStatus {
    guard(|| {
        let l = landscape_arg(landscape)?;
        let d = domain_arg(domain)?;
        let init = ExtendedInit::at_point(slice_arg(x0, len, "x0")?.to_vec());
        let opts = SimOptions { domain: Some(d.clone()), ..Default::default() };
        let r = simulate_sid(&init, l, sigma, dt, horizon, seed, &opts)?.record;
        *out_arg(record, "record")? = SidExitRecord { exit_time: r.exit_time, censored: r.censored, steps: r.steps };
        if !exit_point.is_null() {
            let out = std::slice::from_raw_parts_mut(exit_point, len);
            match &r.exit_point {
                Some(z) => out.copy_from_slice(z),
                None => out.fill(f64::NAN),
            }
        }
        Ok(())
    })
}

/// Minimum of the frozen-measure action over paths from `a` to `z`, on the
/// default horizon grid with node spacing `dt`.
///
/// # Safety
/// `a` and `z` must point to `len` values; `value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sid_minimize_action(
    landscape: *const SidLandscape,
    a: *const f64,
    z: *const f64,
    len: usize,
    dt: f64,
    value: *mut f64,
) -> SidStatus {
    guard(|| {
        let l = landscape_arg(landscape)?;
        let opts = MinimizeOptions { dt, ..Default::default() };
        let r = minimize_action(l, slice_arg(a, len, "a")?, slice_arg(z, len, "z")?, &opts)?;
        *out_arg(value, "value")? = r.value;
        Ok(())
    })
}

/// Mean exit time at `x0` from the one-dimensional boundary value problem on
/// `(lo, hi)`; the landscape must be one-dimensional without interaction.
///
/// # Safety
/// `value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sid_bvp_mean_exit(
    landscape: *const SidLandscape,
    lo: f64,
    hi: f64,
    sigma: f64,
    grid_n: usize,
    x0: f64,
    value: *mut f64,
) -> SidStatus {
    guard(|| {
        let l = landscape_arg(landscape)?;
        let sol = bvp_mean_exit_1d(l, lo, hi, sigma, grid_n)?;
        *out_arg(value, "value")? = sol.at(x0);
        Ok(())
    })
}

/// Runs a campaign from a JSON config and returns the summary as JSON.
///
/// # Safety
/// `config_json` must be a NUL-terminated string; `summary_json` must be
/// writable. Release the result with [`sid_string_free`].
#[no_mangle]
pub unsafe extern "C" fn sid_run_campaign(config_json: *const c_char, summary_json: *mut *mut c_char) -> SidStatus {
    guard(|| {
        let out = out_arg(summary_json, "summary_json")?;
        *out = ptr::null_mut();
        let cfg = ExperimentConfig::from_json_str(str_arg(config_json, "config_json")?)?;
        let r = run_exit_campaign(&cfg)?;
        *out = to_c_string(serde_json::to_string(&r.summary).map_err(Error::from)?)?;
        Ok(())
    })
}
