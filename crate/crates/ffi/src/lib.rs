//! C ABI for `ssblowup`.
//!
//! Results come back through out-pointers; every function returns an
//! [`SsbStatus`]. On failure the message is available from
//! [`ssb_last_error_message`] until the next call on the same thread.
//! Objects are opaque handles released with their `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ssblowup::contfrac::{eigen_residual, find_spectrum};
use ssblowup::evolve::{center_curvature, init_data, FieldState, InitialData, RadialGrid, Stepper};
use ssblowup::modes::{build_mode, EigenmodeProfile};
use ssblowup::shooting::wronskian;
use ssblowup::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SsbStatus {
    Ok = 0,
    InvalidArgument = 1,
    NullPointer = 2,
    OutOfRange = 3,
    /// Pole, non-convergent series, failed integration or overflow.
    Numerical = 4,
    Panic = 5,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let s = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(s));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(err: &Error) -> SsbStatus {
    match err {
        Error::InvalidArgument(_) | Error::Config(_) => SsbStatus::InvalidArgument,
        _ => SsbStatus::Numerical,
    }
}

/// Runs `f` with panics and errors turned into status codes.
fn guard<F>(f: F) -> SsbStatus
where
    F: FnOnce() -> Result<(), (SsbStatus, String)>,
{
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SsbStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside ssblowup");
            SsbStatus::Panic
        }
    }
}

fn lib<T>(r: ssblowup::Result<T>) -> Result<T, (SsbStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(name: &str) -> (SsbStatus, String) {
    (SsbStatus::NullPointer, format!("{name} is null"))
}

/// Message of the last failed call on this thread, or null. Owned by the
/// library.
#[no_mangle]
pub extern "C" fn ssb_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn ssb_version() -> *const c_char {
    static V: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => panic!("version string"),
    };
    V.as_ptr()
}

/// Eigenvalue condition `F(lambda)` from the continued fraction.
///
/// # Safety
/// `out` must be null or valid for one `double` write.
#[no_mangle]
pub unsafe extern "C" fn ssb_eigen_residual(lambda: f64, out: *mut f64) -> SsbStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let v = lib(eigen_residual(lambda))?;
        unsafe { *out = v };
        Ok(())
    })
}

/// Wronskian of the branches regular at `rho = 0` and `rho = 1`, at
/// `rho_match`.
///
/// # Safety
/// `out` must be null or valid for one `double` write.
#[no_mangle]
pub unsafe extern "C" fn ssb_wronskian(lambda: f64, rho_match: f64, out: *mut f64) -> SsbStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let v = lib(wronskian(lambda, rho_match))?;
        unsafe { *out = v };
        Ok(())
    })
}

/// Eigenvalues found on a scan, in descending order.
pub struct SsbSpectrum {
    eigenvalues: Vec<f64>,
}

/// Scans `[lambda_min, lambda_max]` with `step` and bisects roots to `tol`.
///
/// # Safety
/// `out` must be null or valid for one pointer write. The handle written
/// there must be released with [`ssb_spectrum_free`].
#[no_mangle]
pub unsafe extern "C" fn ssb_spectrum_find(
    lambda_min: f64,
    lambda_max: f64,
    step: f64,
    tol: f64,
    out: *mut *mut SsbSpectrum,
) -> SsbStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if !(lambda_min < lambda_max && step > 0.0 && tol > 0.0) {
            return Err((SsbStatus::InvalidArgument, "need lambda_min < lambda_max, step > 0, tol > 0".into()));
        }
        let eigenvalues = find_spectrum(lambda_min, lambda_max, step, tol).eigenvalues();
        unsafe { *out = Box::into_raw(Box::new(SsbSpectrum { eigenvalues })) };
        Ok(())
    })
}

/// Number of eigenvalues, 0 for a null handle.
///
/// # Safety
/// `spectrum` must be null or a live handle from [`ssb_spectrum_find`].
#[no_mangle]
pub unsafe extern "C" fn ssb_spectrum_len(spectrum: *const SsbSpectrum) -> usize {
    unsafe { spectrum.as_ref() }.map_or(0, |s| s.eigenvalues.len())
}

/// # Safety
/// `spectrum` must be null or a live handle; `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn ssb_spectrum_get(spectrum: *const SsbSpectrum, index: usize, out: *mut f64) -> SsbStatus {
    guard(|| {
        let s = unsafe { spectrum.as_ref() }.ok_or_else(|| null("spectrum"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let v = s.eigenvalues.get(index).ok_or_else(|| {
            (SsbStatus::OutOfRange, format!("index {index} out of range for {} eigenvalues", s.eigenvalues.len()))
        })?;
        unsafe { *out = *v };
        Ok(())
    })
}

/// # Safety
/// `spectrum` must be null or a live handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ssb_spectrum_free(spectrum: *mut SsbSpectrum) {
    if !spectrum.is_null() {
        drop(unsafe { Box::from_raw(spectrum) });
    }
}

/// Eigenmode `w(rho)` on a caller-supplied grid.
pub struct SsbMode {
    profile: EigenmodeProfile,
}

/// Builds the mode with eigenvalue `lambda` on `rho[0..n]` (values in
/// `[0, 1]`), normalized by `w = rho^2 + ...` at the center.
///
/// # Safety
/// `rho` must be valid for `n` reads; `out` null or writable. Release the
/// handle with [`ssb_mode_free`].
#[no_mangle]
pub unsafe extern "C" fn ssb_mode_build(lambda: f64, rho: *const f64, n: usize, out: *mut *mut SsbMode) -> SsbStatus {
    guard(|| {
        if rho.is_null() {
            return Err(null("rho"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let grid = unsafe { std::slice::from_raw_parts(rho, n) };
        let profile = lib(build_mode(lambda, grid))?;
        unsafe { *out = Box::into_raw(Box::new(SsbMode { profile })) };
        Ok(())
    })
}

/// Copies `w` into `out[0..n]`; `n` must equal the grid length.
///
/// # Safety
/// `mode` must be null or a live handle; `out` valid for `n` writes.
#[no_mangle]
pub unsafe extern "C" fn ssb_mode_values(mode: *const SsbMode, out: *mut f64, n: usize) -> SsbStatus {
    guard(|| {
        let m = unsafe { mode.as_ref() }.ok_or_else(|| null("mode"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        if n != m.profile.len() {
            return Err((SsbStatus::OutOfRange, format!("buffer length {n} != grid length {}", m.profile.len())));
        }
        unsafe { std::slice::from_raw_parts_mut(out, n) }.copy_from_slice(&m.profile.w);
        Ok(())
    })
}

/// # Safety
/// `mode` must be null or a live handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ssb_mode_free(mode: *mut SsbMode) {
    if !mode.is_null() {
        drop(unsafe { Box::from_raw(mode) });
    }
}

/// Radial field on a uniform grid, advanced by RK4.
pub struct SsbEvolution {
    state: FieldState,
    stepper: Stepper,
    t0: f64,
    steps: u64,
}

fn new_evolution(
    m: usize,
    r_max: f64,
    data: InitialData,
    out: *mut *mut SsbEvolution,
) -> Result<(), (SsbStatus, String)> {
    if out.is_null() {
        return Err(null("out"));
    }
    let grid = lib(RadialGrid::new(m, r_max))?;
    let state = lib(init_data(&data, &grid))?;
    let stepper = Stepper::new(state.u.len(), state.dr);
    let h = SsbEvolution { t0: state.t, state, stepper, steps: 0 };
    unsafe { *out = Box::into_raw(Box::new(h)) };
    Ok(())
}

/// `U0(r / t0)` cut off smoothly on `[r_cut, r_cut + width]`, on `m`
/// intervals of `[0, r_max]`.
///
/// # Safety
/// `out` must be null or writable. Release with [`ssb_evolution_free`].
#[no_mangle]
pub unsafe extern "C" fn ssb_evolution_new_self_similar(
    m: usize,
    r_max: f64,
    t0: f64,
    r_cut: f64,
    width: f64,
    out: *mut *mut SsbEvolution,
) -> SsbStatus {
    guard(|| new_evolution(m, r_max, InitialData::TruncatedSelfSimilar { t0, r_cut, width }, out))
}

/// `u = 1 - A r^2 exp(-(r - r0)^2 / sigma^2)` cut off on
/// `[r_cut, r_cut + width]`, at rest.
///
/// # Safety
/// `out` must be null or writable. Release with [`ssb_evolution_free`].
#[no_mangle]
pub unsafe extern "C" fn ssb_evolution_new_gaussian(
    m: usize,
    r_max: f64,
    amplitude: f64,
    r0: f64,
    sigma: f64,
    r_cut: f64,
    width: f64,
    out: *mut *mut SsbEvolution,
) -> SsbStatus {
    guard(|| new_evolution(m, r_max, InitialData::GaussianLump { amplitude, r0, sigma, r_cut, width }, out))
}

/// Advances by `count` steps of `dt <= dr / 2`. On overflow the state is
/// left at the last finite step and `Numerical` is returned.
///
/// # Safety
/// `evolution` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ssb_evolution_step(evolution: *mut SsbEvolution, dt: f64, count: u64) -> SsbStatus {
    guard(|| {
        let h = unsafe { evolution.as_mut() }.ok_or_else(|| null("evolution"))?;
        if !(dt > 0.0) || dt > 0.5 * h.state.dr * (1.0 + 1e-12) {
            return Err((SsbStatus::InvalidArgument, format!("dt = {dt} violates 0 < dt <= dr / 2")));
        }
        for _ in 0..count {
            let t_new = h.t0 + (h.steps + 1) as f64 * dt;
            lib(h.stepper.step(&mut h.state, dt, t_new))?;
            h.steps += 1;
        }
        Ok(())
    })
}

/// Current time, NaN for a null handle.
///
/// # Safety
/// `evolution` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ssb_evolution_time(evolution: *const SsbEvolution) -> f64 {
    unsafe { evolution.as_ref() }.map_or(f64::NAN, |h| h.state.t)
}

/// Grid spacing, NaN for a null handle.
///
/// # Safety
/// `evolution` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ssb_evolution_dr(evolution: *const SsbEvolution) -> f64 {
    unsafe { evolution.as_ref() }.map_or(f64::NAN, |h| h.state.dr)
}

/// `u_rr(t, 0)`, NaN for a null handle.
///
/// # Safety
/// `evolution` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ssb_evolution_center_curvature(evolution: *const SsbEvolution) -> f64 {
    unsafe { evolution.as_ref() }.map_or(f64::NAN, |h| center_curvature(&h.state))
}

/// Number of grid values (`m + 1`), 0 for a null handle.
///
/// # Safety
/// `evolution` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ssb_evolution_len(evolution: *const SsbEvolution) -> usize {
    unsafe { evolution.as_ref() }.map_or(0, |h| h.state.u.len())
}

/// Copies `u` into `out[0..n]`; `n` must equal [`ssb_evolution_len`].
///
/// # Safety
/// `evolution` must be null or a live handle; `out` valid for `n` writes.
#[no_mangle]
pub unsafe extern "C" fn ssb_evolution_field(evolution: *const SsbEvolution, out: *mut f64, n: usize) -> SsbStatus {
    guard(|| {
        let h = unsafe { evolution.as_ref() }.ok_or_else(|| null("evolution"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        if n != h.state.u.len() {
            return Err((SsbStatus::OutOfRange, format!("buffer length {n} != {}", h.state.u.len())));
        }
        unsafe { std::slice::from_raw_parts_mut(out, n) }.copy_from_slice(&h.state.u);
        Ok(())
    })
}

/// # Safety
/// `evolution` must be null or a live handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ssb_evolution_free(evolution: *mut SsbEvolution) {
    if !evolution.is_null() {
        drop(unsafe { Box::from_raw(evolution) });
    }
}
