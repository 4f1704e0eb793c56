use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use krein_ffi::*;

fn c(re: f64, im: f64) -> KreinComplex {
    KreinComplex { re, im }
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(krein_last_error_message()) }
        .to_str()
        .unwrap()
        .to_owned()
}

fn well(value: KreinComplex) -> *mut KreinProblem {
    let segment = KreinSegment {
        r_left: 0.0,
        r_right: 1.0,
        value,
    };
    let mut p = ptr::null_mut();
    assert_eq!(
        unsafe { krein_problem_new(1.0, 4.0, 4, 200, &segment, 1, &mut p) },
        KreinStatus::Ok
    );
    p
}

#[test]
fn free_dtn_through_the_abi() {
    let mut p = ptr::null_mut();
    assert_eq!(
        unsafe { krein_problem_new(1.0, 4.0, 4, 200, ptr::null(), 0, &mut p) },
        KreinStatus::Ok
    );
    let mut out = KreinDtn::default();
    assert_eq!(unsafe { krein_dtn(p, 0, c(-1.0, 0.0), &mut out) }, KreinStatus::Ok);
    assert!((out.sum.re + 1.876_015_364_156_936_3).abs() < 1e-12);
    assert_eq!(last_error(), "");
    let mut s = KreinComplex::default();
    assert_eq!(unsafe { krein_mt_inverse(p, 0, c(-1.0, 0.0), &mut s) }, KreinStatus::Ok);
    assert!((s.re + 0.533_044_674_956_268_6).abs() < 1e-12);
    unsafe { krein_problem_free(p) };
}

#[test]
fn errors_map_to_status_codes() {
    let p = well(c(-10.0, 0.0));
    let mut out = KreinDtn::default();
    assert_eq!(
        unsafe { krein_dtn(p, 0, c(3.0, 0.0), &mut out) },
        KreinStatus::EssentialSpectrum
    );
    assert!(last_error().contains("essential spectrum"));
    assert_eq!(
        unsafe { krein_dtn(p, 1000, c(-1.0, 0.0), &mut out) },
        KreinStatus::Numerical
    );
    assert_eq!(
        unsafe { krein_dtn(ptr::null(), 0, c(-1.0, 0.0), &mut out) },
        KreinStatus::NullPointer
    );
    assert_eq!(
        unsafe { krein_dtn(p, 0, c(-1.0, 0.0), ptr::null_mut()) },
        KreinStatus::NullPointer
    );
    unsafe { krein_problem_free(p) };

    let mut q = ptr::null_mut();
    assert_eq!(
        unsafe { krein_problem_new(2.0, 1.0, 4, 200, ptr::null(), 0, &mut q) },
        KreinStatus::InvalidSpec
    );
    assert!(q.is_null());
    unsafe { krein_problem_free(q) };
}

#[test]
fn scan_locates_the_well_eigenvalue() {
    let p = well(c(-10.0, 0.0));
    let region = KreinScanRegion {
        re_min: -9.5,
        re_max: -0.5,
        im_min: -1.0,
        im_max: 1.0,
        re_cells: 6,
        im_cells: 2,
        cut_band: 1e-3,
    };
    let modes = [0, 1];
    let mut result = ptr::null_mut();
    assert_eq!(
        unsafe { krein_scan(p, &region, modes.as_ptr(), 2, 2, &mut result) },
        KreinStatus::Ok
    );
    assert_eq!(unsafe { krein_scan_result_len(result) }, 2);
    assert_eq!(unsafe { krein_scan_result_unresolved(result) }, 0);
    assert!(!unsafe { krein_scan_result_clipped(result) });
    let mut zero = KreinZero {
        mode: 0,
        lambda: c(0.0, 0.0),
        abs_d: 0.0,
        winding: 0,
        newton_iterations: 0,
        converged: false,
    };
    assert_eq!(unsafe { krein_scan_result_get(result, 0, &mut zero) }, KreinStatus::Ok);
    assert_eq!(zero.mode, 0);
    assert!((zero.lambda.re + 6.766_865_519_043_49).abs() < 1e-9);
    assert!(zero.converged);
    let mut s = KreinComplex::default();
    assert_eq!(
        unsafe { krein_mt_inverse(p, 0, zero.lambda, &mut s) },
        KreinStatus::NearSingular
    );
    assert_eq!(
        unsafe { krein_scan_result_get(result, 5, &mut zero) },
        KreinStatus::InvalidArgument
    );
    unsafe {
        krein_scan_result_free(result);
        krein_problem_free(p);
    }
}

#[test]
fn problem_from_toml() {
    let text =
        CString::new("mode_cutoff = 2\n[[potential.segments]]\nr_left = 0.0\nr_right = 1.0\nre = 2.0\nim = 1.0\n")
            .unwrap();
    let mut p = ptr::null_mut();
    assert_eq!(
        unsafe { krein_problem_from_toml(text.as_ptr(), &mut p) },
        KreinStatus::Ok
    );
    let mut out = KreinDtn::default();
    assert_eq!(unsafe { krein_dtn(p, 2, c(-2.0, 0.5), &mut out) }, KreinStatus::Ok);
    unsafe { krein_problem_free(p) };

    let bad = CString::new("mode_cutoff = \"x\"").unwrap();
    assert_eq!(
        unsafe { krein_problem_from_toml(bad.as_ptr(), &mut p) },
        KreinStatus::InvalidSpec
    );
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(krein_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

fn profile_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

const C_PROGRAM: &str = r#"
#include <math.h>
#include <stdio.h>
#include "krein.h"

int main(void) {
    KreinProblem *p = NULL;
    if (krein_problem_new(1.0, 4.0, 2, 100, NULL, 0, &p) != KREIN_STATUS_OK) return 1;
    KreinDtn d;
    KreinComplex lambda = {-1.0, 0.0};
    if (krein_dtn(p, 0, lambda, &d) != KREIN_STATUS_OK) return 2;
    if (fabs(d.sum.re + 1.8760153641569353) > 1e-10) return 3;
    KreinComplex cut = {2.0, 0.0};
    if (krein_dtn(p, 0, cut, &d) != KREIN_STATUS_ESSENTIAL_SPECTRUM) return 4;
    printf("%s\n", krein_last_error_message());
    krein_problem_free(p);
    return 0;
}
"#;

#[test]
fn header_compiles_and_links_from_c() {
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let lib = profile_dir().join("libkrein_ffi.a");
    assert!(lib.exists(), "static library missing at {}", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    let exe = dir.path().join("main");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let status = Command::new("cc")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(&include)
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("essential spectrum"));
}
