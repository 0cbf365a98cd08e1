use std::ffi::{CStr, CString};
use std::process::Command;
use std::ptr;

use mbm_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(mbm_last_error_message()) }.to_string_lossy().into_owned()
}

fn constant_hurst(h: f64) -> *mut MbmHurst {
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { mbm_hurst_constant(h, &mut out) }, MbmStatus::Ok);
    assert!(!out.is_null());
    out
}

#[test]
fn scalar_functions() {
    let mut v = f64::NAN;
    assert_eq!(unsafe { mbm_c1(0.5, &mut v) }, MbmStatus::Ok);
    assert!((v - 1.0).abs() < 1e-14);
    assert_eq!(unsafe { mbm_molchan_kernel(0.75, 1.0, 0.5, &mut v) }, MbmStatus::Ok);
    assert!((v - 0.937_591_963_698_057_2).abs() < 1e-10);
    assert!((mbm_phi(0.0) - 0.398_942_280_401_432_7).abs() < 1e-16);
}

#[test]
fn errors_set_status_and_message() {
    let mut v = 42.0;
    assert_eq!(unsafe { mbm_molchan_kernel(0.75, 0.5, 1.0, &mut v) }, MbmStatus::Domain);
    assert_eq!(v, 42.0, "out-pointer must be untouched on failure");
    assert!(!last_error().is_empty());

    assert_eq!(unsafe { mbm_c1(0.75, ptr::null_mut()) }, MbmStatus::NullPointer);
    assert!(last_error().contains("NULL"));

    let mut h = ptr::null_mut();
    assert_eq!(unsafe { mbm_hurst_constant(1.5, &mut h) }, MbmStatus::Domain);
    assert!(h.is_null());
}

#[test]
fn leading_constant_and_exponents() {
    let h = constant_hurst(0.75);
    let mut payoff = ptr::null_mut();
    assert_eq!(unsafe { mbm_payoff_call(0.0, &mut payoff) }, MbmStatus::Ok);

    let mut inner = 0.0;
    assert_eq!(unsafe { mbm_leading_constant_inner(h, 0.0, 1e-10, &mut inner) }, MbmStatus::Ok);
    assert!((inner / (4.0 * mbm_phi(0.0)) - 1.0).abs() < 1e-8);

    let mut total = 0.0;
    assert_eq!(unsafe { mbm_leading_constant(payoff, h, 1e-10, &mut total) }, MbmStatus::Ok);
    assert!((total - 0.797_884_560_802_865_4).abs() < 1e-8);

    let mut e = MbmRateExponents::default();
    assert_eq!(unsafe { mbm_rate_exponents(h, 1e-3, &mut e) }, MbmStatus::Ok);
    assert_eq!((e.h_tilde, e.leading_exponent, e.remainder_exponent), (0.75, 0.5, 0.75));
    assert!(e.lower_bound_applicable);

    unsafe {
        mbm_payoff_free(payoff);
        mbm_hurst_free(h);
    }
}

#[test]
fn sampler_round_trip() {
    let h = constant_hurst(0.75);
    let mut sampler = ptr::null_mut();
    assert_eq!(unsafe { mbm_sampler_new(h, MbmSimulator::Cholesky, 8, 1, 1e6, &mut sampler) }, MbmStatus::Ok);
    assert_eq!(unsafe { mbm_sampler_n(sampler) }, 8);

    let mut a = [f64::NAN; 9];
    let mut b = [f64::NAN; 9];
    assert_eq!(unsafe { mbm_sampler_sample(sampler, 5, 3, a.as_mut_ptr(), a.len()) }, MbmStatus::Ok);
    assert_eq!(unsafe { mbm_sampler_sample(sampler, 5, 3, b.as_mut_ptr(), b.len()) }, MbmStatus::Ok);
    assert_eq!(a, b);
    assert_eq!(a[0], 0.0);
    assert_eq!(unsafe { mbm_sampler_sample(sampler, 5, 3, a.as_mut_ptr(), 4) }, MbmStatus::BufferSize);

    let mut payoff = ptr::null_mut();
    assert_eq!(unsafe { mbm_payoff_abs(0.1, &mut payoff) }, MbmStatus::Ok);
    let mut gap = f64::NAN;
    assert_eq!(unsafe { mbm_discretization_gap(payoff, a.as_ptr(), a.len(), &mut gap) }, MbmStatus::Ok);
    assert!(gap >= -1e-12);

    unsafe {
        mbm_payoff_free(payoff);
        mbm_sampler_free(sampler);
        mbm_hurst_free(h);
        mbm_sampler_free(ptr::null_mut());
    }
}

#[test]
fn converge_from_toml() {
    let text = CString::new(
        r#"
[hurst]
family = "constant"
h = 0.75
[payoff]
kind = "call"
[simulator]
kind = "cholesky"
[experiment]
n_grid = [16, 32, 64]
replications = 400
"#,
    )
    .unwrap();
    let mut json = ptr::null_mut();
    let mut passed = false;
    assert_eq!(unsafe { mbm_converge_toml(text.as_ptr(), 2, &mut json, &mut passed) }, MbmStatus::Ok);
    let body = unsafe { CStr::from_ptr(json) }.to_str().unwrap().to_owned();
    unsafe { mbm_string_free(json) };
    assert!(body.contains("\"fitted_slope\""));

    let bad = CString::new("[hurst]\nfamily = \"constant\"\nh = 0.75\n").unwrap();
    let status = unsafe { mbm_converge_toml(bad.as_ptr(), 0, &mut json, &mut passed) };
    assert_eq!(status, MbmStatus::Config);
    assert!(last_error().contains("payoff"));
}

#[test]
fn header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/mbm.h");
    let Ok(status) = Command::new("cc").args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-x", "c", header]).status()
    else {
        eprintln!("no C compiler on PATH, skipping");
        return;
    };
    assert!(status.success());
}
