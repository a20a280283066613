//! C ABI for the `mdpwf` solver.
//!
//! Models and results are opaque handles owned by the caller and released
//! with the matching `*_free` function. Every fallible call returns an
//! [`MdpwfStatus`]; on failure [`mdpwf_last_error`] describes what went wrong
//! on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use mdpwf::gen::builtin;
use mdpwf::model::format;
use mdpwf::strategy::{CountingStrategy, StrategyRecord};
use mdpwf::welfare::{optimize, WelfareConfig};
use mdpwf::{AsymMdp, Error, NumericMode, Rational, Scalar};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MdpwfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    InvalidModel = 4,
    Io = 5,
    Solve = 6,
    OutOfRange = 7,
    Panic = 8,
}

/// Opaque model handle.
pub struct MdpwfModel {
    model: AsymMdp,
}

/// Opaque optimization result handle.
pub struct MdpwfResult {
    num_states: usize,
    num_principals: usize,
    kappa: u64,
    strategy: CountingStrategy,
    reports: Vec<Report>,
    strategy_json: CString,
}

struct Report {
    per_principal: Vec<f64>,
    social_welfare: f64,
    social_welfare_text: CString,
    baseline: f64,
    deviation_gain: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(text));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(err: &Error) -> MdpwfStatus {
    match err {
        Error::Parse(_) | Error::Dimacs { .. } => MdpwfStatus::Parse,
        Error::Invalid(_) | Error::InvalidDistribution { .. } | Error::UnknownBuiltin(_) => MdpwfStatus::InvalidModel,
        Error::Io { .. } => MdpwfStatus::Io,
        Error::UnknownState(_) | Error::UnknownAction { .. } | Error::DisabledAction { .. } => MdpwfStatus::OutOfRange,
        _ => MdpwfStatus::Solve,
    }
}

struct Fail(MdpwfStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> MdpwfStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MdpwfStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside mdpwf");
            MdpwfStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail(MdpwfStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(MdpwfStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| Fail(MdpwfStatus::NullPointer, format!("{what} is null")))
}

unsafe fn write_out<T>(out: *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail(MdpwfStatus::NullPointer, "output pointer is null".into()));
    }
    out.write(value);
    Ok(())
}

fn mode(exact: bool) -> NumericMode {
    if exact {
        NumericMode::Exact
    } else {
        NumericMode::float()
    }
}

fn boxed_model(out: *mut *mut MdpwfModel, model: AsymMdp) -> Result<(), Fail> {
    let handle = Box::into_raw(Box::new(MdpwfModel { model }));
    unsafe { write_out(out, handle) }.inspect_err(|_| drop(unsafe { Box::from_raw(handle) }))
}

/// Message for the last failed call on this thread, or null if it succeeded.
/// The pointer stays valid until the next `mdpwf_*` call on the same thread.
#[no_mangle]
pub extern "C" fn mdpwf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mdpwf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses a model from JSON text.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn mdpwf_model_from_json(json: *const c_char, exact: bool, out: *mut *mut MdpwfModel) -> MdpwfStatus {
    guard(|| {
        let text = str_arg(json, "json")?;
        let doc = format::parse(text, mode(exact))?;
        boxed_model(out, doc.model)
    })
}

/// Loads a model file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn mdpwf_model_load(path: *const c_char, exact: bool, out: *mut *mut MdpwfModel) -> MdpwfStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let model = format::load(Path::new(path), mode(exact))?;
        boxed_model(out, model)
    })
}

/// Builds one of the bundled example models by name.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn mdpwf_model_builtin(name: *const c_char, out: *mut *mut MdpwfModel) -> MdpwfStatus {
    guard(|| {
        let name = str_arg(name, "name")?;
        boxed_model(out, builtin::builtin(name)?)
    })
}

/// Serializes a model to canonical JSON. Free the result with [`mdpwf_string_free`].
///
/// # Safety
/// `model` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn mdpwf_model_to_json(model: *const MdpwfModel, out: *mut *mut c_char) -> MdpwfStatus {
    guard(|| {
        let m = ref_arg(model, "model")?;
        let text = format::to_string(&m.model.clone().into());
        let c = CString::new(text).map_err(|e| Fail(MdpwfStatus::Solve, e.to_string()))?;
        write_out(out, c.into_raw())
    })
}

/// Number of states, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mdpwf_model_num_states(model: *const MdpwfModel) -> usize {
    model.as_ref().map_or(0, |m| m.model.num_states())
}

/// Number of principals, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mdpwf_model_num_principals(model: *const MdpwfModel) -> usize {
    model.as_ref().map_or(0, |m| m.model.num_principals())
}

/// Releases a model. Null is ignored.
///
/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mdpwf_model_free(model: *mut MdpwfModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

fn solve<T: Scalar>(model: &AsymMdp, cfg: &WelfareConfig) -> Result<MdpwfResult, Fail> {
    let out = optimize(&model.numeric::<T>(), cfg)?;
    let reports = (0..model.num_states())
        .map(|s| {
            let r = out.report(s);
            Report {
                per_principal: r.per_principal.iter().map(Scalar::to_f64).collect(),
                social_welfare: r.social_welfare.to_f64(),
                social_welfare_text: CString::new(r.social_welfare.render()).unwrap_or_default(),
                baseline: r.baseline.to_f64(),
                deviation_gain: r.deviation_gain.to_f64(),
            }
        })
        .collect();
    let json = StrategyRecord::counting(model, &out.strategy, None).to_json();
    Ok(MdpwfResult {
        num_states: model.num_states(),
        num_principals: model.num_principals(),
        kappa: out.strategy.kappa as u64,
        strategy: out.strategy,
        reports,
        strategy_json: CString::new(json).map_err(|e| Fail(MdpwfStatus::Solve, e.to_string()))?,
    })
}

/// Computes a welfare-optimal counting strategy for every start state.
/// `max_kappa` of 0 keeps the default search limit.
///
/// # Safety
/// `model` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn mdpwf_optimize(
    model: *const MdpwfModel,
    exact: bool,
    max_kappa: u64,
    out: *mut *mut MdpwfResult,
) -> MdpwfStatus {
    guard(|| {
        let m = &ref_arg(model, "model")?.model;
        let mut cfg = WelfareConfig::new(mode(exact));
        if max_kappa > 0 {
            cfg.max_kappa = max_kappa;
        }
        let result = if exact { solve::<Rational>(m, &cfg)? } else { solve::<f64>(m, &cfg)? };
        let handle = Box::into_raw(Box::new(result));
        write_out(out, handle).inspect_err(|_| drop(Box::from_raw(handle)))
    })
}

unsafe fn report<'a>(result: *const MdpwfResult, start: usize) -> Result<&'a Report, Fail> {
    let r = ref_arg(result, "result")?;
    r.reports.get(start).ok_or_else(|| {
        Fail(
            MdpwfStatus::OutOfRange,
            format!("start state {start} out of range (model has {})", r.num_states),
        )
    })
}

/// Length of the counting prefix, or 0 for a null handle.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mdpwf_result_kappa(result: *const MdpwfResult) -> u64 {
    result.as_ref().map_or(0, |r| r.kappa)
}

/// Action index the strategy takes in `state` after `step` steps.
///
/// # Safety
/// `result` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn mdpwf_result_action(
    result: *const MdpwfResult,
    step: usize,
    state: usize,
    out: *mut usize,
) -> MdpwfStatus {
    guard(|| {
        let r = ref_arg(result, "result")?;
        if state >= r.num_states {
            return Err(Fail(MdpwfStatus::OutOfRange, format!("state {state} out of range")));
        }
        write_out(out, r.strategy.action(step, state))
    })
}

/// Social welfare from `start`.
///
/// # Safety
/// `result` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn mdpwf_result_social_welfare(result: *const MdpwfResult, start: usize, out: *mut f64) -> MdpwfStatus {
    guard(|| write_out(out, report(result, start)?.social_welfare))
}

/// Social welfare from `start` as text (`p/q` in exact mode). The string is
/// owned by the result and lives as long as it does.
///
/// # Safety
/// `result` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn mdpwf_result_social_welfare_text(
    result: *const MdpwfResult,
    start: usize,
    out: *mut *const c_char,
) -> MdpwfStatus {
    guard(|| write_out(out, report(result, start)?.social_welfare_text.as_ptr()))
}

/// Payoff of one principal from `start`.
///
/// # Safety
/// `result` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn mdpwf_result_payoff(
    result: *const MdpwfResult,
    start: usize,
    principal: usize,
    out: *mut f64,
) -> MdpwfStatus {
    guard(|| {
        let rep = report(result, start)?;
        let n = ref_arg(result, "result")?.num_principals;
        let v = rep
            .per_principal
            .get(principal)
            .ok_or_else(|| Fail(MdpwfStatus::OutOfRange, format!("principal {principal} out of range (model has {n})")))?;
        write_out(out, *v)
    })
}

/// Welfare of the best positional strategy and the gain over it, from `start`.
///
/// # Safety
/// `result` must be a live handle; each output pointer may be null to skip it.
#[no_mangle]
pub unsafe extern "C" fn mdpwf_result_baseline(
    result: *const MdpwfResult,
    start: usize,
    baseline: *mut f64,
    gain: *mut f64,
) -> MdpwfStatus {
    guard(|| {
        let rep = report(result, start)?;
        if !baseline.is_null() {
            baseline.write(rep.baseline);
        }
        if !gain.is_null() {
            gain.write(rep.deviation_gain);
        }
        Ok(())
    })
}

/// Strategy as JSON, owned by the result.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mdpwf_result_strategy_json(result: *const MdpwfResult) -> *const c_char {
    result.as_ref().map_or(ptr::null(), |r| r.strategy_json.as_ptr())
}

/// Releases a result. Null is ignored.
///
/// # Safety
/// `result` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mdpwf_result_free(result: *mut MdpwfResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must be null or a string obtained from an `mdpwf_*` call documented
/// as caller-owned.
#[no_mangle]
pub unsafe extern "C" fn mdpwf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
