//! C ABI for the certification toolkit.
//!
//! Results are returned through opaque handles that the caller releases with
//! the matching `_free` function. Every entry point returns a
//! [`SpecpropStatus`]; on failure the message is available from
//! [`specprop_last_error_message`] on the same thread. Panics never cross the
//! boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use specprop::certificate::{certify, Certificate, CertifyOptions, Conditions, Verdict};
use specprop::soliton::{solve_ground_state, RadialProfile};
use specprop::{Error, Problem, SolverSettings};

/// Status code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpecpropStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// An integrator, shooting or iteration failure.
    NumericalFailure = 3,
    /// The far boundary condition is not yet satisfied; increase `r_max`.
    DomainTooSmall = 4,
    /// A requested ledger entry, Gram value or index is absent.
    NotFound = 5,
    Internal = 6,
    Panic = 7,
}

/// Orthogonality conditions on the `𝓛−` even block in 1d.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpecpropConditions {
    Natural = 0,
    Alternative = 1,
    Fmr = 2,
}

/// Overall outcome of a certification.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpecpropVerdict {
    Holds = 0,
    Inconclusive = 1,
    Fault = 2,
}

/// Opaque certificate handle.
pub struct SpecpropCertificate {
    inner: Certificate,
}

/// Opaque soliton handle.
pub struct SpecpropSoliton {
    inner: RadialProfile,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> SpecpropStatus {
    match e {
        Error::Stage { source, .. } => status_of(source),
        Error::UnsupportedDimension(_) | Error::InvalidArgument(_) | Error::Config(_) => SpecpropStatus::InvalidArgument,
        Error::DomainTooSmall { .. } => SpecpropStatus::DomainTooSmall,
        Error::IncompleteRun(_) | Error::MissingCache(_) => SpecpropStatus::NotFound,
        Error::SchemaMismatch(_) | Error::Io(_) => SpecpropStatus::Internal,
        _ => SpecpropStatus::NumericalFailure,
    }
}

/// Runs `f`, recording errors and converting panics.
fn guard(f: impl FnOnce() -> Result<(), (SpecpropStatus, String)>) -> SpecpropStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SpecpropStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            SpecpropStatus::Panic
        }
    }
}

fn fail(e: Error) -> (SpecpropStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (SpecpropStatus, String) {
    (SpecpropStatus::NullPointer, format!("{what} is null"))
}

fn problem_and_settings(dimension: u32, sigma: f64, r_max: f64, tol: f64) -> Result<(Problem, SolverSettings), Error> {
    let problem = Problem::new(dimension as usize, sigma, 1.0)?;
    let mut settings = SolverSettings::for_problem(&problem);
    if r_max > 0.0 {
        settings.r_max = r_max;
    }
    if tol > 0.0 {
        settings.tol = tol;
    }
    settings.validate()?;
    Ok((problem, settings))
}

unsafe fn name_arg<'a>(name: *const c_char) -> Result<&'a str, (SpecpropStatus, String)> {
    if name.is_null() {
        return Err(null("name"));
    }
    // SAFETY: the caller passes a NUL-terminated string valid for the call.
    CStr::from_ptr(name)
        .to_str()
        .map_err(|_| (SpecpropStatus::InvalidArgument, "name is not UTF-8".into()))
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn specprop_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn specprop_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Certifies the spectral property. `dimension` is 1 or 3 (3 requires
/// `sigma = 1`); non-positive `r_max` or `tol` select the defaults.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn specprop_certify(
    dimension: u32,
    sigma: f64,
    r_max: f64,
    tol: f64,
    conditions: SpecpropConditions,
    out: *mut *mut SpecpropCertificate,
) -> SpecpropStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let (problem, settings) = problem_and_settings(dimension, sigma, r_max, tol).map_err(fail)?;
        let options = CertifyOptions {
            conditions: match conditions {
                SpecpropConditions::Natural => Conditions::Natural,
                SpecpropConditions::Alternative => Conditions::Alternative,
                SpecpropConditions::Fmr => Conditions::Fmr,
            },
            ..CertifyOptions::default()
        };
        let profile = solve_ground_state(&problem, &settings).map_err(fail)?;
        let (cert, _) = certify(Arc::new(profile), &settings, &options).map_err(fail)?;
        // SAFETY: checked non-null above.
        *out = Box::into_raw(Box::new(SpecpropCertificate { inner: cert }));
        Ok(())
    })
}

/// Verdict of a certificate.
///
/// # Safety
/// `cert` must be a live handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn specprop_certificate_verdict(
    cert: *const SpecpropCertificate,
    out: *mut SpecpropVerdict,
) -> SpecpropStatus {
    guard(|| {
        let c = cert.as_ref().ok_or_else(|| null("cert"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = match c.inner.verdict {
            Verdict::Holds => SpecpropVerdict::Holds,
            Verdict::Inconclusive => SpecpropVerdict::Inconclusive,
            Verdict::Fault => SpecpropVerdict::Fault,
        };
        Ok(())
    })
}

/// Ledger value by name, e.g. `"K1^(0)"` or `"J1^(e)"`.
///
/// # Safety
/// `cert` must be a live handle, `name` NUL-terminated and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn specprop_certificate_ledger_value(
    cert: *const SpecpropCertificate,
    name: *const c_char,
    out: *mut f64,
) -> SpecpropStatus {
    guard(|| {
        let c = cert.as_ref().ok_or_else(|| null("cert"))?;
        let name = name_arg(name)?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = c.inner.ledger.get(name).map_err(fail)?;
        Ok(())
    })
}

/// Gram value by name, e.g. `"K^(0)"`, `"J^(e)"` or `"Jhat^(e)"`.
///
/// # Safety
/// As for [`specprop_certificate_ledger_value`].
#[no_mangle]
pub unsafe extern "C" fn specprop_certificate_gram_value(
    cert: *const SpecpropCertificate,
    name: *const c_char,
    out: *mut f64,
) -> SpecpropStatus {
    guard(|| {
        let c = cert.as_ref().ok_or_else(|| null("cert"))?;
        let name = name_arg(name)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let g = c
            .inner
            .gram
            .get(name)
            .ok_or_else(|| (SpecpropStatus::NotFound, format!("no Gram value {name}")))?;
        *out = g.value;
        Ok(())
    })
}

/// Index of a block by operator label, e.g. `"calL+^(0)"`.
///
/// # Safety
/// As for [`specprop_certificate_ledger_value`].
#[no_mangle]
pub unsafe extern "C" fn specprop_certificate_index(
    cert: *const SpecpropCertificate,
    operator: *const c_char,
    out: *mut u32,
) -> SpecpropStatus {
    guard(|| {
        let c = cert.as_ref().ok_or_else(|| null("cert"))?;
        let name = name_arg(operator)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let r = c
            .inner
            .indexes
            .get(name)
            .ok_or_else(|| (SpecpropStatus::NotFound, format!("no index for {name}")))?;
        *out = r.index as u32;
        Ok(())
    })
}

/// Full certificate as JSON. Release with [`specprop_string_free`].
///
/// # Safety
/// `cert` must be a live handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn specprop_certificate_to_json(
    cert: *const SpecpropCertificate,
    out: *mut *mut c_char,
) -> SpecpropStatus {
    guard(|| {
        let c = cert.as_ref().ok_or_else(|| null("cert"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let s = serde_json::to_string_pretty(&c.inner).map_err(|e| (SpecpropStatus::Internal, e.to_string()))?;
        *out = CString::new(s)
            .map_err(|e| (SpecpropStatus::Internal, e.to_string()))?
            .into_raw();
        Ok(())
    })
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn specprop_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Releases a certificate. Null is ignored.
///
/// # Safety
/// `cert` must come from [`specprop_certify`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn specprop_certificate_free(cert: *mut SpecpropCertificate) {
    if !cert.is_null() {
        drop(Box::from_raw(cert));
    }
}

/// Solves for the ground state. Non-positive `r_max` or `tol` select the defaults.
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn specprop_soliton_solve(
    dimension: u32,
    sigma: f64,
    r_max: f64,
    tol: f64,
    out: *mut *mut SpecpropSoliton,
) -> SpecpropStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let (problem, settings) = problem_and_settings(dimension, sigma, r_max, tol).map_err(fail)?;
        let p = solve_ground_state(&problem, &settings).map_err(fail)?;
        *out = Box::into_raw(Box::new(SpecpropSoliton { inner: p }));
        Ok(())
    })
}

/// `R(r)` and `R'(r)` for `r ≥ 0`; either output pointer may be null.
///
/// # Safety
/// `sol` must be a live handle; non-null outputs must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn specprop_soliton_eval(
    sol: *const SpecpropSoliton,
    r: f64,
    value: *mut f64,
    derivative: *mut f64,
) -> SpecpropStatus {
    guard(|| {
        let s = sol.as_ref().ok_or_else(|| null("sol"))?;
        if !(r >= 0.0 && r.is_finite()) {
            return Err((SpecpropStatus::InvalidArgument, format!("r must be finite and >= 0, got {r}")));
        }
        let (v, d) = s.inner.eval(r);
        if !value.is_null() {
            *value = v;
        }
        if !derivative.is_null() {
            *derivative = d;
        }
        Ok(())
    })
}

/// Substitution residual of an accepted soliton.
///
/// # Safety
/// `sol` must be a live handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn specprop_soliton_residual(sol: *const SpecpropSoliton, out: *mut f64) -> SpecpropStatus {
    guard(|| {
        let s = sol.as_ref().ok_or_else(|| null("sol"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = s.inner.residual;
        Ok(())
    })
}

/// Releases a soliton. Null is ignored.
///
/// # Safety
/// `sol` must come from [`specprop_soliton_solve`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn specprop_soliton_free(sol: *mut SpecpropSoliton) {
    if !sol.is_null() {
        drop(Box::from_raw(sol));
    }
}
