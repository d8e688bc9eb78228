//! C ABI over `ratchoice`.
//!
//! Every function returns an [`RcStatus`]; results go through out-pointers.
//! On failure a message is kept per thread and read with
//! [`rc_last_error_message`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, c_void, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use ratchoice::conflict::{Dyad, Feature, NormParams, N_FEATURES};
use ratchoice::control::{self, Controllable};
use ratchoice::expectations::ExpectationModel;
use ratchoice::optimizers::{golden_section, GoldenConfig};
use ratchoice::utility::{inverse_cost, inverse_cost_utility, rank_alternatives, Alternative};
use ratchoice::Error;

/// Number of dyad features expected by the risk functions, in the order
/// allies, contiguity, distance, major_power, democracy, dependency,
/// capability.
pub const RC_N_FEATURES: usize = 7;

const _: () = assert!(RC_N_FEATURES == N_FEATURES);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RcStatus {
    Ok = 0,
    /// A required pointer was null or a string was not UTF-8.
    NullArgument = 1,
    /// Input or configuration rejected.
    InvalidInput = 2,
    /// A computation produced a non-finite value.
    Numerical = 3,
    /// A file could not be read.
    Io = 4,
    /// Internal panic; the library state is unchanged.
    Panic = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RcVariable {
    Democracy = 0,
    Allies = 1,
    Capability = 2,
    Dependency = 3,
}

impl From<RcVariable> for Controllable {
    fn from(v: RcVariable) -> Self {
        match v {
            RcVariable::Democracy => Controllable::Democracy,
            RcVariable::Allies => Controllable::Allies,
            RcVariable::Capability => Controllable::Capability,
            RcVariable::Dependency => Controllable::Dependency,
        }
    }
}

/// Trained risk model together with its feature scaling.
pub struct RcModel {
    model: ExpectationModel,
    norm: NormParams,
}

/// Objective for [`rc_golden_section`]; `ctx` is passed through untouched.
pub type RcObjective = Option<unsafe extern "C" fn(x: f64, ctx: *mut c_void) -> f64>;

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure {
    status: RcStatus,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Divergence { .. } | Error::NonFiniteObjective { .. } => RcStatus::Numerical,
            Error::Io { .. } => RcStatus::Io,
            _ => RcStatus::InvalidInput,
        };
        Failure { status, message: e.to_string() }
    }
}

fn null(what: &str) -> Failure {
    Failure { status: RcStatus::NullArgument, message: format!("{what} is null") }
}

fn invalid(message: impl Into<String>) -> Failure {
    Failure { status: RcStatus::InvalidInput, message: message.into() }
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> RcStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
            RcStatus::Ok
        }
        Ok(Err(f)) => {
            set_last_error(&f.message);
            f.status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(&format!("internal panic: {msg}"));
            RcStatus::Panic
        }
    }
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(PathBuf::from)
        .map_err(|_| Failure { status: RcStatus::NullArgument, message: format!("{what} is not UTF-8") })
}

unsafe fn features_arg(p: *const f64) -> Result<[f64; N_FEATURES], Failure> {
    if p.is_null() {
        return Err(null("features"));
    }
    let mut f = [0.0; N_FEATURES];
    f.copy_from_slice(std::slice::from_raw_parts(p, N_FEATURES));
    Ok(f)
}

fn dyad_from(features: &[f64; N_FEATURES]) -> Result<Dyad, Failure> {
    let mut d = Dyad {
        allies: false,
        contiguity: false,
        distance: 0.0,
        major_power: false,
        democracy: 0.0,
        dependency: 0.0,
        capability: 0.0,
        conflict: true,
    };
    for f in Feature::ALL {
        let v = features[f.index()];
        if f.is_binary() && v != 0.0 && v != 1.0 {
            return Err(invalid(format!("{f} must be 0 or 1, got {v}")));
        }
        d.set(f, v);
    }
    d.validate().map_err(invalid)?;
    Ok(d)
}

/// Message for the most recent failure on this thread, or null after a
/// success. The pointer stays valid until the next call into the library on
/// the same thread.
#[no_mangle]
pub extern "C" fn rc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Utility `1 / cost` of a positive, finite cost.
///
/// # Safety
/// `utility_out` must be null or point to writable memory for one `double`.
#[no_mangle]
pub unsafe extern "C" fn rc_inverse_cost_utility(cost: f64, utility_out: *mut f64) -> RcStatus {
    guard(|| {
        let out = out(utility_out, "utility_out")?;
        *out = inverse_cost_utility(cost)?.value();
        Ok(())
    })
}

/// Ranks `n` alternatives by inverse-cost utility, best first. Ties keep the
/// lower index first. `order_out[k]` receives the index of the k-th ranked
/// alternative and `utility_out[k]` its utility.
///
/// # Safety
/// `n` must be at least 1; `costs` must point to `n` readable doubles and
/// `order_out` and `utility_out` to `n` writable elements each.
#[no_mangle]
pub unsafe extern "C" fn rc_rank_by_cost(
    costs: *const f64,
    n: usize,
    order_out: *mut usize,
    utility_out: *mut f64,
) -> RcStatus {
    guard(|| {
        if n == 0 {
            return Err(Failure::from(Error::EmptyInput("costs")));
        }
        if costs.is_null() || order_out.is_null() || utility_out.is_null() {
            return Err(null("costs, order_out or utility_out"));
        }
        let costs = std::slice::from_raw_parts(costs, n);
        // zero-padded ids make the lexicographic tie-break follow the index
        let alts = costs
            .iter()
            .enumerate()
            .map(|(i, c)| Alternative::new(format!("{i:020}"), i.to_string(), *c))
            .collect::<Result<Vec<_>, _>>()?;
        let ranked = rank_alternatives(&alts, inverse_cost)?;
        let order = std::slice::from_raw_parts_mut(order_out, n);
        let utility = std::slice::from_raw_parts_mut(utility_out, n);
        for (k, (alt, u)) in ranked.iter().enumerate() {
            order[k] = alt.label.parse().expect("label holds the index");
            utility[k] = u.value();
        }
        Ok(())
    })
}

/// Golden section search for a minimum of `f` on `[lo, hi]`.
///
/// # Safety
/// `f` must be safe to call with `ctx` from this thread. `x_out` and
/// `value_out` must point to writable doubles.
#[no_mangle]
pub unsafe extern "C" fn rc_golden_section(
    f: RcObjective,
    ctx: *mut c_void,
    lo: f64,
    hi: f64,
    tol: f64,
    max_iter: usize,
    x_out: *mut f64,
    value_out: *mut f64,
) -> RcStatus {
    guard(|| {
        let f = f.ok_or_else(|| null("objective"))?;
        let x_out = out(x_out, "x_out")?;
        let value_out = out(value_out, "value_out")?;
        let r = golden_section(|x| f(x, ctx), lo, hi, tol, max_iter)?;
        *x_out = r.best_point[0];
        *value_out = r.best_value;
        Ok(())
    })
}

/// Loads a model file and its scaling file written by `ratchoice train`.
/// The handle must be released with [`rc_model_free`].
///
/// # Safety
/// Paths must be null or NUL-terminated strings; `model_out` must point to a
/// writable pointer.
#[no_mangle]
pub unsafe extern "C" fn rc_model_load(
    model_path: *const c_char,
    norm_path: *const c_char,
    model_out: *mut *mut RcModel,
) -> RcStatus {
    guard(|| {
        let slot = out(model_out, "model_out")?;
        *slot = ptr::null_mut();
        let model = ExpectationModel::load(path_arg(model_path, "model_path")?)?;
        let norm = NormParams::load(path_arg(norm_path, "norm_path")?)?;
        if model.input_width() != N_FEATURES {
            return Err(invalid(format!("model takes {} inputs, expected {N_FEATURES}", model.input_width())));
        }
        *slot = Box::into_raw(Box::new(RcModel { model, norm }));
        Ok(())
    })
}

/// Releases a handle from [`rc_model_load`]. Null is ignored.
///
/// # Safety
/// `model` must be null or a live handle that is not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn rc_model_free(model: *mut RcModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Predicted conflict risk of a dyad given as `RC_N_FEATURES` raw values.
///
/// # Safety
/// `model` must be a live handle, `features` must point to `RC_N_FEATURES`
/// readable doubles and `risk_out` to a writable double.
#[no_mangle]
pub unsafe extern "C" fn rc_model_risk(model: *const RcModel, features: *const f64, risk_out: *mut f64) -> RcStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let risk_out = out(risk_out, "risk_out")?;
        let d = dyad_from(&features_arg(features)?)?;
        *risk_out = control::risk(&m.model, &d, &m.norm)?;
        Ok(())
    })
}

/// Tunes one controllable variable of a conflict dyad to lower its risk.
/// Writes the controlled features (unchanged when no improvement exists)
/// and the risk before and after.
///
/// # Safety
/// `model` must be a live handle; `features` must point to `RC_N_FEATURES`
/// readable doubles and `features_out` to as many writable ones (the two
/// may alias); `risk_before_out` and `risk_after_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rc_control_single(
    model: *const RcModel,
    features: *const f64,
    variable: RcVariable,
    features_out: *mut f64,
    risk_before_out: *mut f64,
    risk_after_out: *mut f64,
) -> RcStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let d = dyad_from(&features_arg(features)?)?;
        if features_out.is_null() {
            return Err(null("features_out"));
        }
        let before = out(risk_before_out, "risk_before_out")?;
        let after = out(risk_after_out, "risk_after_out")?;
        let c = control::control_single(&m.model, &m.norm, &d, variable.into(), &GoldenConfig::default())?;
        std::slice::from_raw_parts_mut(features_out, N_FEATURES).copy_from_slice(&c.controlled.features());
        *before = c.risk_before;
        *after = c.risk_after;
        Ok(())
    })
}
