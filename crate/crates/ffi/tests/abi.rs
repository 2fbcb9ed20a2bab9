use std::ffi::CStr;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use ssblowup_ffi::*;

fn last_error() -> String {
    let p = ssb_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn residual_vanishes_at_gauge_eigenvalue() {
    let mut f = f64::NAN;
    assert_eq!(unsafe { ssb_eigen_residual(1.0, &mut f) }, SsbStatus::Ok);
    assert!(f.abs() < 1e-10);
    assert!(ssb_last_error_message().is_null());
}

#[test]
fn null_out_pointer_is_reported() {
    assert_eq!(unsafe { ssb_eigen_residual(1.0, ptr::null_mut()) }, SsbStatus::NullPointer);
    assert!(last_error().contains("null"));
}

#[test]
fn wronskian_pole_is_numerical_error() {
    let mut w = 0.0;
    assert_eq!(unsafe { ssb_wronskian(-3.0, 0.5, &mut w) }, SsbStatus::Numerical);
    assert!(!last_error().is_empty());
    assert_eq!(unsafe { ssb_wronskian(-1.5, 2.0, &mut w) }, SsbStatus::InvalidArgument);
}

#[test]
fn spectrum_handle_roundtrip() {
    let mut h: *mut SsbSpectrum = ptr::null_mut();
    assert_eq!(unsafe { ssb_spectrum_find(-3.0, 1.5, 0.01, 1e-12, &mut h) }, SsbStatus::Ok);
    assert_eq!(unsafe { ssb_spectrum_len(h) }, 3);
    let mut l = 0.0;
    assert_eq!(unsafe { ssb_spectrum_get(h, 1, &mut l) }, SsbStatus::Ok);
    assert!((l + 0.588904).abs() < 1e-4);
    assert_eq!(unsafe { ssb_spectrum_get(h, 3, &mut l) }, SsbStatus::OutOfRange);
    unsafe { ssb_spectrum_free(h) };
    unsafe { ssb_spectrum_free(ptr::null_mut()) };
    assert_eq!(unsafe { ssb_spectrum_len(ptr::null()) }, 0);
}

#[test]
fn spectrum_rejects_bad_range() {
    let mut h: *mut SsbSpectrum = ptr::null_mut();
    assert_eq!(unsafe { ssb_spectrum_find(1.0, -1.0, 0.01, 1e-12, &mut h) }, SsbStatus::InvalidArgument);
    assert!(h.is_null());
}

#[test]
fn gauge_mode_through_the_abi() {
    let rho: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
    let mut h: *mut SsbMode = ptr::null_mut();
    assert_eq!(unsafe { ssb_mode_build(1.0, rho.as_ptr(), rho.len(), &mut h) }, SsbStatus::Ok);
    let mut w = vec![0.0; rho.len()];
    assert_eq!(unsafe { ssb_mode_values(h, w.as_mut_ptr(), w.len() - 1) }, SsbStatus::OutOfRange);
    assert_eq!(unsafe { ssb_mode_values(h, w.as_mut_ptr(), w.len()) }, SsbStatus::Ok);
    for (r, w) in rho.iter().zip(&w).skip(1) {
        let exact = 25.0 * r * r / (5.0 + 3.0 * r * r).powi(2);
        assert!((w / exact - 1.0).abs() < 1e-8);
    }
    unsafe { ssb_mode_free(h) };
}

#[test]
fn non_eigenvalue_mode_fails() {
    let rho = [0.0, 0.5, 0.95, 1.0];
    let mut h: *mut SsbMode = ptr::null_mut();
    assert_eq!(unsafe { ssb_mode_build(-1.5, rho.as_ptr(), rho.len(), &mut h) }, SsbStatus::Numerical);
    assert!(last_error().contains("seam"));
}

#[test]
fn evolution_follows_exact_curvature() {
    let mut h: *mut SsbEvolution = ptr::null_mut();
    assert_eq!(unsafe { ssb_evolution_new_self_similar(512, 2.0, 1.0, 1.3, 0.3, &mut h) }, SsbStatus::Ok);
    let dr = unsafe { ssb_evolution_dr(h) };
    assert_eq!(dr, 2.0 / 512.0);
    assert_eq!(unsafe { ssb_evolution_step(h, dr, 1) }, SsbStatus::InvalidArgument);
    // t = 0.5
    assert_eq!(unsafe { ssb_evolution_step(h, 0.5 * dr, 256) }, SsbStatus::Ok);
    let t = unsafe { ssb_evolution_time(h) };
    assert_eq!(t, 0.5);
    let k = unsafe { ssb_evolution_center_curvature(h) };
    let exact = -3.2 / (1.0 - t).powi(2);
    assert!((k / exact - 1.0).abs() < 1e-3, "{k} vs {exact}");
    let n = unsafe { ssb_evolution_len(h) };
    let mut u = vec![0.0; n];
    assert_eq!(unsafe { ssb_evolution_field(h, u.as_mut_ptr(), n) }, SsbStatus::Ok);
    assert_eq!(u[0], 1.0);
    unsafe { ssb_evolution_free(h) };
    assert!(unsafe { ssb_evolution_time(ptr::null()) }.is_nan());
}

#[test]
fn evolution_rejects_data_outside_grid() {
    let mut h: *mut SsbEvolution = ptr::null_mut();
    let s = unsafe { ssb_evolution_new_gaussian(256, 1.0, 1.0, 0.0, 1.0, 1.2, 0.6, &mut h) };
    assert_eq!(s, SsbStatus::InvalidArgument);
    assert!(h.is_null());
}

#[test]
fn version_is_crate_version() {
    let v = unsafe { CStr::from_ptr(ssb_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

fn header() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include").join("ssblowup.h")
}

#[test]
fn header_declares_every_export() {
    let h = std::fs::read_to_string(header()).unwrap();
    for name in [
        "ssb_last_error_message",
        "ssb_version",
        "ssb_eigen_residual",
        "ssb_wronskian",
        "ssb_spectrum_find",
        "ssb_spectrum_len",
        "ssb_spectrum_get",
        "ssb_spectrum_free",
        "ssb_mode_build",
        "ssb_mode_values",
        "ssb_mode_free",
        "ssb_evolution_new_self_similar",
        "ssb_evolution_new_gaussian",
        "ssb_evolution_step",
        "ssb_evolution_time",
        "ssb_evolution_dr",
        "ssb_evolution_center_curvature",
        "ssb_evolution_len",
        "ssb_evolution_field",
        "ssb_evolution_free",
        "SSB_STATUS_OK",
        "typedef struct SsbSpectrum SsbSpectrum",
    ] {
        assert!(h.contains(name), "{name} missing from header");
    }
}

const C_PROGRAM: &str = r#"
#include <stdio.h>
#include <math.h>
#include "ssblowup.h"
int main(void) {
    SsbSpectrum *s = NULL;
    if (ssb_spectrum_find(-3.0, 1.5, 0.01, 1e-12, &s) != SSB_STATUS_OK) return 1;
    if (ssb_spectrum_len(s) != 3) return 2;
    double l = 0.0;
    if (ssb_spectrum_get(s, 1, &l) != SSB_STATUS_OK || fabs(l + 0.588904) > 1e-4) return 3;
    ssb_spectrum_free(s);
    if (ssb_eigen_residual(1.0, NULL) != SSB_STATUS_NULL_POINTER) return 4;
    if (ssb_last_error_message() == NULL) return 5;
    printf("%.6f\n", l);
    return 0;
}
"#;

/// Compiles a C program against the header and the static library when a C
/// compiler and the library are both available.
#[test]
fn c_program_links_and_runs() {
    let tmp = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    let target = tmp.parent().unwrap();
    let lib = ["debug", "release"].iter().map(|p| target.join(p).join("libssblowup_ffi.a")).find(|p| p.exists());
    let Some(lib) = lib else {
        eprintln!("static library not built; skipping");
        return;
    };
    if Command::new("cc").arg("--version").output().is_err() {
        eprintln!("no C compiler; skipping");
        return;
    }
    let src = tmp.join("ssb_abi_check.c");
    let exe = tmp.join("ssb_abi_check");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let status = Command::new("cc")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(header().parent().unwrap())
        .arg(&src)
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl"])
        .arg("-o")
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C compilation failed");
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "C program exit {:?}", out.status.code());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "-0.588905");
}
