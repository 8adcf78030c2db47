//! C ABI over the `phs` toolkit.
//!
//! Models are opaque `PhsModel` handles created by `phs_model_from_json` or
//! `phs_model_from_preset` and released with `phs_model_free`. Every fallible
//! function returns a `PhsStatus`; on failure `phs_last_error_message` describes
//! the error for the calling thread.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use phs::config::{LoadedModel, ModelConfig};
use phs::discretize;
use phs::model;
use phs::presets::{self, ParamValue, PresetId};
use phs::report::{self, RunReport};
use phs::spectral;
use phs::wellposed::{self, Classification, TraceSelector, Verdict};
use phs::PhsError;

/// Result codes of the C interface.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhsStatus {
    /// Success.
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// The model or its configuration is invalid.
    InvalidModel = 3,
    /// A dissipativity or passivity hypothesis fails.
    NotDissipative = 4,
    /// A numerical routine failed.
    NumericalFailure = 5,
    /// An argument is out of range.
    InvalidArgument = 6,
    /// An internal panic was caught.
    Panic = 7,
}

/// Opaque model handle.
pub struct PhsModel {
    inner: LoadedModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &PhsError) -> PhsStatus {
    match e {
        PhsError::NotDissipative { .. } | PhsError::NotPassive { .. } => PhsStatus::NotDissipative,
        PhsError::EigenSolverFailure(_)
        | PhsError::OnSpectrum { .. }
        | PhsError::SingularStep
        | PhsError::NonpositiveEnergy { .. }
        | PhsError::NearSingularDenominator { .. } => PhsStatus::NumericalFailure,
        PhsError::BadParameter(_) | PhsError::EmptySelector | PhsError::UnknownPreset(_) => PhsStatus::InvalidArgument,
        _ => PhsStatus::InvalidModel,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (PhsStatus, String)>) -> PhsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PhsStatus::Ok,
        Ok(Err((s, m))) => {
            set_error(&m);
            s
        }
        Err(_) => {
            set_error("internal panic");
            PhsStatus::Panic
        }
    }
}

fn fail(e: PhsError) -> (PhsStatus, String) {
    (status_of(&e), e.to_string())
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (PhsStatus, String)> {
    if p.is_null() {
        return Err((PhsStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| (PhsStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn model_ref<'a>(m: *const PhsModel) -> Result<&'a PhsModel, (PhsStatus, String)> {
    m.as_ref().ok_or((PhsStatus::NullPointer, "model handle is null".to_string()))
}

fn check_out<T>(p: *mut T, what: &str) -> Result<(), (PhsStatus, String)> {
    if p.is_null() {
        Err((PhsStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

/// Message of the last failure on this thread, or null if none occurred.
///
/// # Safety
/// The returned pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub unsafe extern "C" fn phs_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn phs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Parses a JSON model document into a new handle.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer. On success the
/// caller owns `*out` and must release it with `phs_model_free`.
#[no_mangle]
pub unsafe extern "C" fn phs_model_from_json(json: *const c_char, out: *mut *mut PhsModel) -> PhsStatus {
    guard(|| {
        check_out(out, "out")?;
        let text = read_str(json, "json")?;
        let inner = ModelConfig::from_json_str(text).and_then(|c| c.to_model()).map_err(fail)?;
        *out = Box::into_raw(Box::new(PhsModel { inner }));
        Ok(())
    })
}

/// Builds a preset. `params_json` may be null or a JSON object such as `{"k": 2}`.
///
/// # Safety
/// `name` must be a NUL-terminated string, `params_json` null or NUL-terminated, and
/// `out` a valid pointer. The caller owns `*out` on success.
#[no_mangle]
pub unsafe extern "C" fn phs_model_from_preset(name: *const c_char, params_json: *const c_char, out: *mut *mut PhsModel) -> PhsStatus {
    guard(|| {
        check_out(out, "out")?;
        let name = read_str(name, "name")?;
        let params: BTreeMap<String, ParamValue> = if params_json.is_null() {
            BTreeMap::new()
        } else {
            let text = read_str(params_json, "params_json")?;
            serde_json::from_str(text).map_err(|e| (PhsStatus::InvalidArgument, format!("params_json: {e}")))?
        };
        let id = PresetId::from_name(name, &params).map_err(fail)?;
        let pm = presets::preset_model(&id).map_err(fail)?;
        let inner = ModelConfig::from_preset(&pm).to_model().map_err(fail)?;
        *out = Box::into_raw(Box::new(PhsModel { inner }));
        Ok(())
    })
}

/// Releases a model handle. Null is ignored.
///
/// # Safety
/// `model` must be null or a handle returned by this library that was not freed before.
#[no_mangle]
pub unsafe extern "C" fn phs_model_free(model: *mut PhsModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Writes the order `N` and the state dimension `d`.
///
/// # Safety
/// `model` must be a live handle; `n` and `d` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn phs_model_dims(model: *const PhsModel, n: *mut usize, d: *mut usize) -> PhsStatus {
    guard(|| {
        let m = model_ref(model)?;
        check_out(n, "n")?;
        check_out(d, "d")?;
        *n = m.inner.def.n;
        *d = m.inner.def.d;
        Ok(())
    })
}

/// Generation certificate and stability class.
///
/// `*contraction` is 1 when the boundary condition generates a contraction semigroup,
/// else 0. `*classification` is 0 (inconclusive), 1 (asymptotic), 2 (exponential),
/// or −1 when there is no contraction.
///
/// # Safety
/// `model` must be a live handle; the output pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn phs_certify(model: *const PhsModel, contraction: *mut i32, classification: *mut i32) -> PhsStatus {
    guard(|| {
        let m = model_ref(model)?;
        check_out(contraction, "contraction")?;
        check_out(classification, "classification")?;
        let cert = wellposed::check_generation(&m.inner.def, &m.inner.bc).map_err(fail)?;
        if cert.verdict != Verdict::Contraction {
            *contraction = 0;
            *classification = -1;
            return Ok(());
        }
        let st = wellposed::classify_stability(&m.inner.def, &m.inner.bc, false).map_err(fail)?;
        *contraction = 1;
        *classification = match st.classification {
            Classification::Inconclusive => 0,
            Classification::CertifiedAsymptotic => 1,
            Classification::CertifiedExponential => 2,
        };
        Ok(())
    })
}

/// JSON certification report. Free the string with `phs_string_free`.
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn phs_certify_report(model: *const PhsModel, out: *mut *mut c_char) -> PhsStatus {
    guard(|| {
        let m = model_ref(model)?;
        check_out(out, "out")?;
        let def = &m.inner.def;
        let mut rep = RunReport::new("certify");
        rep.set("validation", report::validation_section(&model::validate_phs(def)));
        let cert = wellposed::check_generation(def, &m.inner.bc).map_err(fail)?;
        rep.set("generation_certificate", report::generation_section(&cert));
        if cert.verdict == Verdict::Contraction {
            let st = wellposed::classify_stability(def, &m.inner.bc, false).map_err(fail)?;
            rep.set("kappa_table", report::kappa_table(&st));
            rep.set("classification", report::classification_section(&st));
        }
        *out = CString::new(rep.to_json()).map_err(|e| (PhsStatus::Panic, e.to_string()))?.into_raw();
        Ok(())
    })
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must be null or a string returned by this library that was not freed before.
#[no_mangle]
pub unsafe extern "C" fn phs_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Boundary dissipation coefficient for a trace set such as `"0:0,0:1"`.
///
/// # Safety
/// `model` must be a live handle, `traces` NUL-terminated and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn phs_kappa(model: *const PhsModel, traces: *const c_char, out: *mut f64) -> PhsStatus {
    guard(|| {
        let m = model_ref(model)?;
        check_out(out, "out")?;
        let t = read_str(traces, "traces")?;
        let sel = TraceSelector::parse(t, m.inner.def.n, m.inner.def.d).map_err(fail)?;
        *out = wellposed::boundary_dissipation_coefficient(&m.inner.def, &m.inner.bc, &sel).map_err(fail)?.kappa;
        Ok(())
    })
}

/// Spectral abscissa of the collocation generator of degree `grid_n`.
///
/// # Safety
/// `model` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn phs_spectral_abscissa(model: *const PhsModel, grid_n: usize, out: *mut f64) -> PhsStatus {
    guard(|| {
        let m = model_ref(model)?;
        check_out(out, "out")?;
        if grid_n < 2 {
            return Err((PhsStatus::InvalidArgument, "grid_n must be at least 2".into()));
        }
        let op = discretize::assemble_discrete_generator(&m.inner.def, &m.inner.bc, &discretize::legendre_operator(grid_n)).map_err(fail)?;
        *out = spectral::compute_spectrum(&op, 0.0).map_err(fail)?.spectral_abscissa;
        Ok(())
    })
}

/// Resolvent norm at `iω` of the collocation generator; `+∞` when `iω` is a discrete eigenvalue.
///
/// # Safety
/// `model` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn phs_resolvent_norm(model: *const PhsModel, grid_n: usize, omega: f64, out: *mut f64) -> PhsStatus {
    guard(|| {
        let m = model_ref(model)?;
        check_out(out, "out")?;
        if grid_n < 2 {
            return Err((PhsStatus::InvalidArgument, "grid_n must be at least 2".into()));
        }
        let op = discretize::assemble_discrete_generator(&m.inner.def, &m.inner.bc, &discretize::legendre_operator(grid_n)).map_err(fail)?;
        *out = match spectral::resolvent_norm(&op, omega) {
            Ok(v) => v,
            Err(PhsError::OnSpectrum { .. }) => f64::INFINITY,
            Err(e) => return Err(fail(e)),
        };
        Ok(())
    })
}

/// Closed-form Schrödinger resolvent `x = (iβ − A)^{−1} 𝟙` at `ζ`.
///
/// # Safety
/// `re` and `im` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn phs_schrodinger_oracle(beta: f64, k: f64, alpha: f64, zeta: f64, re: *mut f64, im: *mut f64) -> PhsStatus {
    guard(|| {
        check_out(re, "re")?;
        check_out(im, "im")?;
        let v = presets::schrodinger_resolvent_oracle(beta, k, alpha, &[zeta]).map_err(fail)?[0];
        *re = v.re;
        *im = v.im;
        Ok(())
    })
}
