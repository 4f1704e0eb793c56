//! C ABI over `krein-core`.
//!
//! Every function returns a [`KreinStatus`]; on failure the message is kept per
//! thread and read back with [`krein_last_error_message`]. Handles are opaque
//! and owned by the caller until passed to the matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use krein_core::config::RunConfig;
use krein_core::error::KreinError;
use krein_core::geometry::{PotentialSegment, Problem, ProblemSpec, RadialPotential};
use krein_core::krein::{dtn_pair, mt_inverse};
use krein_core::scan::{scan, ScanOptions, ScanRegion, ZeroRecord};
use num_complex::Complex64;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KreinStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidSpec = 3,
    /// λ on or too near `[0, ∞)`.
    EssentialSpectrum = 4,
    /// λ is a Dirichlet eigenvalue of one side.
    Degenerate = 5,
    /// `M + τ` numerically zero: λ is (close to) an eigenvalue.
    NearSingular = 6,
    /// Special-function range, overflow or a singular linear system.
    Numerical = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KreinComplex {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for KreinComplex {
    fn from(z: Complex64) -> Self {
        Self { re: z.re, im: z.im }
    }
}

impl From<KreinComplex> for Complex64 {
    fn from(z: KreinComplex) -> Self {
        Complex64::new(z.re, z.im)
    }
}

/// Constant potential value on `[r_left, r_right)`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KreinSegment {
    pub r_left: f64,
    pub r_right: f64,
    pub value: KreinComplex,
}

/// `M_m(λ)`, `τ_m(λ)` and their sum.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KreinDtn {
    pub interior: KreinComplex,
    pub exterior: KreinComplex,
    pub sum: KreinComplex,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KreinScanRegion {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
    pub re_cells: usize,
    pub im_cells: usize,
    pub cut_band: f64,
}

/// One located eigenvalue. `abs_d` is NaN where `M + τ` is undefined.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KreinZero {
    pub mode: i32,
    pub lambda: KreinComplex,
    pub abs_d: f64,
    pub winding: i32,
    pub newton_iterations: usize,
    pub converged: bool,
}

/// Opaque problem handle.
pub struct KreinProblem(Problem);

/// Opaque scan result: zeros plus counts of unresolved cells and the clipping flag.
pub struct KreinScanResult {
    zeros: Vec<KreinZero>,
    unresolved: usize,
    clipped: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: &str) {
    let text = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = text);
}

fn status_of(e: &KreinError) -> KreinStatus {
    match e {
        KreinError::EssentialSpectrum { .. } => KreinStatus::EssentialSpectrum,
        KreinError::DegenerateInterior { .. } | KreinError::DegenerateExterior { .. } => KreinStatus::Degenerate,
        KreinError::NearSingular { .. } => KreinStatus::NearSingular,
        KreinError::InvalidSpec(_) => KreinStatus::InvalidSpec,
        KreinError::InvalidArgument(_) | KreinError::Mismatch(_) | KreinError::UnsupportedTail { .. } => {
            KreinStatus::InvalidArgument
        }
        KreinError::BesselDomain { .. }
        | KreinError::BesselOrder { .. }
        | KreinError::Overflow(_)
        | KreinError::Singular(_) => KreinStatus::Numerical,
    }
}

/// Runs `f`, records any error or panic, and returns its status.
fn guard(f: impl FnOnce() -> Result<(), (KreinStatus, String)>) -> KreinStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            KreinStatus::Ok
        }
        Ok(Err((status, message))) => {
            set_last_error(&message);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            KreinStatus::Panic
        }
    }
}

fn core(e: KreinError) -> (KreinStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (KreinStatus, String) {
    (KreinStatus::NullPointer, format!("{what} is null"))
}

/// Message of the last failing call on this thread; empty after a success.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn krein_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn krein_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a problem from explicit parameters. `segments` may be null when `n_segments` is 0.
///
/// # Safety
/// `segments` must point to `n_segments` readable values and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn krein_problem_new(
    interface_radius: f64,
    truncation_radius: f64,
    mode_cutoff: u32,
    grid_points: usize,
    segments: *const KreinSegment,
    n_segments: usize,
    out: *mut *mut KreinProblem,
) -> KreinStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if segments.is_null() && n_segments > 0 {
            return Err(null("segments"));
        }
        let raw = if n_segments == 0 {
            &[][..]
        } else {
            std::slice::from_raw_parts(segments, n_segments)
        };
        let potential = RadialPotential::new(
            raw.iter()
                .map(|s| PotentialSegment {
                    r_left: s.r_left,
                    r_right: s.r_right,
                    value: s.value.into(),
                })
                .collect(),
        )
        .map_err(core)?;
        let spec = ProblemSpec::new(interface_radius, truncation_radius, mode_cutoff, grid_points, potential);
        let problem = Problem::new(spec).map_err(core)?;
        *out = Box::into_raw(Box::new(KreinProblem(problem)));
        Ok(())
    })
}

/// Builds a problem from the text of a TOML run configuration.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn krein_problem_from_toml(toml: *const c_char, out: *mut *mut KreinProblem) -> KreinStatus {
    guard(|| {
        if toml.is_null() {
            return Err(null("toml"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let text = CStr::from_ptr(toml)
            .to_str()
            .map_err(|_| (KreinStatus::InvalidArgument, "configuration is not UTF-8".to_owned()))?;
        let config = RunConfig::from_toml(text).map_err(core)?;
        config.validate().map_err(core)?;
        let problem = Problem::new(config.problem_spec()).map_err(core)?;
        *out = Box::into_raw(Box::new(KreinProblem(problem)));
        Ok(())
    })
}

/// # Safety
/// `problem` must be null or a handle from `krein_problem_new`/`krein_problem_from_toml`
/// that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn krein_problem_free(problem: *mut KreinProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// # Safety
/// `problem` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn krein_dtn(
    problem: *const KreinProblem,
    mode: i32,
    lambda: KreinComplex,
    out: *mut KreinDtn,
) -> KreinStatus {
    guard(|| {
        let p = problem.as_ref().ok_or_else(|| null("problem"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let (mi, tau) = dtn_pair(&p.0, mode, lambda.into()).map_err(core)?;
        *out = KreinDtn {
            interior: mi.into(),
            exterior: tau.into(),
            sum: (mi + tau).into(),
        };
        Ok(())
    })
}

/// `1 / (M_m(λ) + τ_m(λ))`; `NearSingular` at eigenvalues.
///
/// # Safety
/// `problem` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn krein_mt_inverse(
    problem: *const KreinProblem,
    mode: i32,
    lambda: KreinComplex,
    out: *mut KreinComplex,
) -> KreinStatus {
    guard(|| {
        let p = problem.as_ref().ok_or_else(|| null("problem"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = mt_inverse(&p.0, mode, lambda.into()).map_err(core)?.into();
        Ok(())
    })
}

/// Locates eigenvalues of the listed modes in `region`. `threads = 0` picks automatically;
/// the result does not depend on it.
///
/// # Safety
/// `problem` must be a live handle, `region` readable, `modes` must point to `n_modes`
/// values and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn krein_scan(
    problem: *const KreinProblem,
    region: *const KreinScanRegion,
    modes: *const i32,
    n_modes: usize,
    threads: usize,
    out: *mut *mut KreinScanResult,
) -> KreinStatus {
    guard(|| {
        let p = problem.as_ref().ok_or_else(|| null("problem"))?;
        let r = region.as_ref().ok_or_else(|| null("region"))?;
        if modes.is_null() || n_modes == 0 {
            return Err((KreinStatus::InvalidArgument, "no modes given".to_owned()));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let modes = std::slice::from_raw_parts(modes, n_modes);
        let region = ScanRegion {
            re_min: r.re_min,
            re_max: r.re_max,
            im_min: r.im_min,
            im_max: r.im_max,
            re_cells: r.re_cells,
            im_cells: r.im_cells,
            cut_band: r.cut_band,
        };
        let report = scan(&p.0, &region, modes, ScanOptions { threads }).map_err(core)?;
        let zeros = report
            .zeros
            .iter()
            .map(|z: &ZeroRecord| KreinZero {
                mode: z.mode,
                lambda: z.lambda.into(),
                abs_d: z.abs_d,
                winding: z.winding,
                newton_iterations: z.newton_iterations,
                converged: z.converged,
            })
            .collect();
        *out = Box::into_raw(Box::new(KreinScanResult {
            zeros,
            unresolved: report.unresolved.len(),
            clipped: report.clipped,
        }));
        Ok(())
    })
}

/// Number of zeros; 0 for a null handle.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn krein_scan_result_len(result: *const KreinScanResult) -> usize {
    result.as_ref().map_or(0, |r| r.zeros.len())
}

/// Cells whose zeros could not be resolved; 0 for a null handle.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn krein_scan_result_unresolved(result: *const KreinScanResult) -> usize {
    result.as_ref().map_or(0, |r| r.unresolved)
}

/// Whether the region was reduced to keep away from `[0, ∞)`.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn krein_scan_result_clipped(result: *const KreinScanResult) -> bool {
    result.as_ref().is_some_and(|r| r.clipped)
}

/// # Safety
/// `result` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn krein_scan_result_get(
    result: *const KreinScanResult,
    index: usize,
    out: *mut KreinZero,
) -> KreinStatus {
    guard(|| {
        let r = result.as_ref().ok_or_else(|| null("result"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = *r.zeros.get(index).ok_or_else(|| {
            (
                KreinStatus::InvalidArgument,
                format!("index {index} out of range for {} zeros", r.zeros.len()),
            )
        })?;
        Ok(())
    })
}

/// # Safety
/// `result` must be null or a handle from `krein_scan` that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn krein_scan_result_free(result: *mut KreinScanResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}
