//! C ABI over the `ionpump` simulator.
//!
//! Every fallible function returns an [`IonpumpStatus`]; on failure a message
//! is available from [`ionpump_last_error_message`] on the same thread.
//! Objects are opaque heap handles released with their `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ionpump::evolve::{integrate, steady_state, DensityState, PropagationOptions, SteadyCriteria, TimeSeries};
use ionpump::jumps::{conditional_asymptote, run_trajectory, JumpEvent};
use ionpump::qops::Level;
use ionpump::scheme::{build_generator, Generator, Model, SchemeParams};
use ionpump::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IonpumpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Numerical = 3,
    Panic = 4,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IonpumpModel {
    Full = 0,
    Eliminated = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IonpumpLevel {
    Ground = 0,
    Excited = 1,
}

/// Columns of a recorded time series.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IonpumpColumn {
    Time = 0,
    Fidelity = 1,
    Trace = 2,
    MeanPhonon = 3,
    TopLevelPopulation = 4,
}

/// Rates in 1/s, couplings in rad/s.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IonpumpParams {
    pub omega: f64,
    pub omega_r: f64,
    pub omega_rp: f64,
    pub gamma_s: f64,
    pub gamma_sp: f64,
    pub h_r: f64,
    pub xi: f64,
}

/// `dt <= 0` selects the generator's default step.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IonpumpSteadyOptions {
    pub slope_threshold: f64,
    pub hold_time: f64,
    pub time_cap: f64,
    pub check_interval: f64,
    pub dt: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct IonpumpSteadyResult {
    pub fidelity: f64,
    pub time: f64,
    pub max_top_population: f64,
    pub converged: bool,
    pub truncation_violated: bool,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct IonpumpConditionalResult {
    pub fidelity: f64,
    pub reach_time: f64,
    pub survival_at_reach: f64,
    pub converged: bool,
}

pub struct IonpumpGenerator(Generator);

pub struct IonpumpState(DensityState);

pub struct IonpumpSeries {
    series: TimeSeries,
    events: Vec<JumpEvent>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

type Failure = (IonpumpStatus, String);

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn lib_err(e: Error) -> Failure {
    let status = match e {
        Error::NumericalAbort { .. }
        | Error::TraceIncrease { .. }
        | Error::UndefinedPostJump
        | Error::GridMismatch
        | Error::TooFewRecords { .. } => IonpumpStatus::Numerical,
        _ => IonpumpStatus::InvalidArgument,
    };
    (status, e.to_string())
}

fn null(what: &str) -> Failure {
    (IonpumpStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> IonpumpStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => IonpumpStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            IonpumpStatus::Panic
        }
    }
}

/// # Safety
/// `p` is null or points to a valid `T`.
unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

/// # Safety
/// `out` is null or valid for writes.
unsafe fn emit<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

fn level(l: IonpumpLevel) -> Level {
    match l {
        IonpumpLevel::Ground => Level::Ground,
        IonpumpLevel::Excited => Level::Excited,
    }
}

fn criteria(opts: Option<&IonpumpSteadyOptions>) -> SteadyCriteria {
    let mut c = SteadyCriteria::default();
    if let Some(o) = opts {
        c.slope_threshold = o.slope_threshold;
        c.hold_time = o.hold_time;
        c.time_cap = o.time_cap;
        c.check_interval = o.check_interval;
        c.dt = (o.dt > 0.0).then_some(o.dt);
    }
    c
}

fn propagation(t_max: f64, dt: f64, stride: usize) -> PropagationOptions {
    let opts = PropagationOptions::new(t_max).with_stride(stride);
    if dt > 0.0 {
        opts.with_dt(dt)
    } else {
        opts
    }
}

impl From<IonpumpParams> for SchemeParams {
    fn from(p: IonpumpParams) -> Self {
        SchemeParams {
            omega: p.omega,
            omega_r: p.omega_r,
            omega_rp: p.omega_rp,
            gamma_s: p.gamma_s,
            gamma_sp: p.gamma_sp,
            h_r: p.h_r,
            xi: p.xi,
        }
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ionpump_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread, or NULL. The pointer stays
/// valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn ionpump_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

#[no_mangle]
pub extern "C" fn ionpump_params_default() -> IonpumpParams {
    let p = SchemeParams::default();
    IonpumpParams {
        omega: p.omega,
        omega_r: p.omega_r,
        omega_rp: p.omega_rp,
        gamma_s: p.gamma_s,
        gamma_sp: p.gamma_sp,
        h_r: p.h_r,
        xi: p.xi,
    }
}

#[no_mangle]
pub extern "C" fn ionpump_steady_options_default() -> IonpumpSteadyOptions {
    let c = SteadyCriteria::default();
    IonpumpSteadyOptions {
        slope_threshold: c.slope_threshold,
        hold_time: c.hold_time,
        time_cap: c.time_cap,
        check_interval: c.check_interval,
        dt: 0.0,
    }
}

/// # Safety
/// `params` must point to a valid `IonpumpParams`; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ionpump_generator_new(
    model: IonpumpModel,
    params: *const IonpumpParams,
    n_motional: usize,
    out: *mut *mut IonpumpGenerator,
) -> IonpumpStatus {
    guard(|| {
        let p = SchemeParams::from(*borrow(params, "params")?);
        let model = match model {
            IonpumpModel::Full => Model::Full,
            IonpumpModel::Eliminated => Model::Eliminated,
        };
        let gen = build_generator(model, &p, n_motional).map_err(lib_err)?;
        emit(out, IonpumpGenerator(gen))
    })
}

/// Hilbert-space dimension, or 0 for a null handle.
///
/// # Safety
/// `gen` is null or a live generator handle.
#[no_mangle]
pub unsafe extern "C" fn ionpump_generator_dim(gen: *const IonpumpGenerator) -> usize {
    gen.as_ref().map_or(0, |g| g.0.spec().dim())
}

/// # Safety
/// `gen` is null or a handle from `ionpump_generator_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ionpump_generator_free(gen: *mut IonpumpGenerator) {
    if !gen.is_null() {
        drop(Box::from_raw(gen));
    }
}

/// `|ion1 ion2⟩ ⊗ |0⟩` on the generator's space.
///
/// # Safety
/// `gen` must be a live generator handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ionpump_state_product(
    gen: *const IonpumpGenerator,
    ion1: IonpumpLevel,
    ion2: IonpumpLevel,
    out: *mut *mut IonpumpState,
) -> IonpumpStatus {
    guard(|| {
        let g = borrow(gen, "generator")?;
        let rho = DensityState::product(g.0.spec(), level(ion1), level(ion2)).map_err(lib_err)?;
        emit(out, IonpumpState(rho))
    })
}

/// # Safety
/// `state` is null or a live state handle.
#[no_mangle]
pub unsafe extern "C" fn ionpump_state_free(state: *mut IonpumpState) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}

/// # Safety
/// `state` must be a live state handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ionpump_state_fidelity(state: *const IonpumpState, out: *mut f64) -> IonpumpStatus {
    guard(|| {
        let s = borrow(state, "state")?;
        let o = out.as_mut().ok_or_else(|| null("output pointer"))?;
        *o = ionpump::analyze::fidelity(&s.0);
        Ok(())
    })
}

/// # Safety
/// `state` must be a live state handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ionpump_state_trace(state: *const IonpumpState, out: *mut f64) -> IonpumpStatus {
    guard(|| {
        let s = borrow(state, "state")?;
        let o = out.as_mut().ok_or_else(|| null("output pointer"))?;
        *o = s.0.trace();
        Ok(())
    })
}

/// Runs to the steady state. `opts` may be NULL for defaults; `out_state` may
/// be NULL when the final state is not needed.
///
/// # Safety
/// Handles must be live; `result` must be writable; `out_state` is null or
/// writable.
#[no_mangle]
pub unsafe extern "C" fn ionpump_steady_state(
    gen: *const IonpumpGenerator,
    rho0: *const IonpumpState,
    opts: *const IonpumpSteadyOptions,
    result: *mut IonpumpSteadyResult,
    out_state: *mut *mut IonpumpState,
) -> IonpumpStatus {
    guard(|| {
        let g = borrow(gen, "generator")?;
        let r = borrow(rho0, "initial state")?;
        let res = result.as_mut().ok_or_else(|| null("result"))?;
        let ss = steady_state(&g.0, &r.0, &criteria(opts.as_ref())).map_err(lib_err)?;
        *res = IonpumpSteadyResult {
            fidelity: ss.fidelity,
            time: ss.time,
            max_top_population: ss.max_top_population,
            converged: ss.converged,
            truncation_violated: ss.truncation_violated,
        };
        if !out_state.is_null() {
            emit(out_state, IonpumpState(ss.state))?;
        }
        Ok(())
    })
}

/// Settled click-free fidelity after a detection from `steady`.
///
/// # Safety
/// Handles must be live; `result` must be writable; `opts` is null or valid.
#[no_mangle]
pub unsafe extern "C" fn ionpump_conditional_asymptote(
    gen: *const IonpumpGenerator,
    steady: *const IonpumpState,
    opts: *const IonpumpSteadyOptions,
    reach_tolerance: f64,
    result: *mut IonpumpConditionalResult,
) -> IonpumpStatus {
    guard(|| {
        let g = borrow(gen, "generator")?;
        let s = borrow(steady, "steady state")?;
        let res = result.as_mut().ok_or_else(|| null("result"))?;
        if !(reach_tolerance > 0.0) {
            return Err((IonpumpStatus::InvalidArgument, "reach_tolerance must be positive".into()));
        }
        let a = conditional_asymptote(&g.0, &s.0, &criteria(opts.as_ref()), reach_tolerance).map_err(lib_err)?;
        *res = IonpumpConditionalResult {
            fidelity: a.fidelity,
            reach_time: a.reach_time,
            survival_at_reach: a.survival_at_reach,
            converged: a.converged,
        };
        Ok(())
    })
}

/// Master-equation run over `[0, t_max]`; `dt <= 0` uses the default step.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ionpump_integrate(
    gen: *const IonpumpGenerator,
    rho0: *const IonpumpState,
    t_max: f64,
    dt: f64,
    stride: usize,
    out: *mut *mut IonpumpSeries,
) -> IonpumpStatus {
    guard(|| {
        let g = borrow(gen, "generator")?;
        let r = borrow(rho0, "initial state")?;
        let prop = integrate(&g.0, &r.0, &propagation(t_max, dt, stride)).map_err(lib_err)?;
        emit(out, IonpumpSeries { series: prop.series, events: Vec::new() })
    })
}

/// One detection-conditioned trajectory.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ionpump_trajectory(
    gen: *const IonpumpGenerator,
    rho0: *const IonpumpState,
    t_max: f64,
    dt: f64,
    stride: usize,
    seed: u64,
    out: *mut *mut IonpumpSeries,
) -> IonpumpStatus {
    guard(|| {
        let g = borrow(gen, "generator")?;
        let r = borrow(rho0, "initial state")?;
        let rec = run_trajectory(&g.0, &r.0, &propagation(t_max, dt, stride), seed).map_err(lib_err)?;
        emit(out, IonpumpSeries { series: rec.series, events: rec.events })
    })
}

/// Number of recorded samples, or 0 for a null handle.
///
/// # Safety
/// `series` is null or a live series handle.
#[no_mangle]
pub unsafe extern "C" fn ionpump_series_len(series: *const IonpumpSeries) -> usize {
    series.as_ref().map_or(0, |s| s.series.len())
}

/// Number of detection events, or 0 for a null handle or master-equation run.
///
/// # Safety
/// `series` is null or a live series handle.
#[no_mangle]
pub unsafe extern "C" fn ionpump_series_event_count(series: *const IonpumpSeries) -> usize {
    series.as_ref().map_or(0, |s| s.events.len())
}

/// Copies one column into `buf`, which must hold `ionpump_series_len` values.
///
/// # Safety
/// `series` must be live; `buf` must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn ionpump_series_column(
    series: *const IonpumpSeries,
    column: IonpumpColumn,
    buf: *mut f64,
    len: usize,
) -> IonpumpStatus {
    guard(|| {
        let s = &borrow(series, "series")?.series;
        let src = match column {
            IonpumpColumn::Time => &s.times,
            IonpumpColumn::Fidelity => &s.fidelity,
            IonpumpColumn::Trace => &s.trace,
            IonpumpColumn::MeanPhonon => &s.mean_phonon,
            IonpumpColumn::TopLevelPopulation => &s.top_level_population,
        };
        copy_out(src.iter().copied(), src.len(), buf, len)
    })
}

/// Copies detection times into `buf`, which must hold
/// `ionpump_series_event_count` values.
///
/// # Safety
/// `series` must be live; `buf` must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn ionpump_series_event_times(
    series: *const IonpumpSeries,
    buf: *mut f64,
    len: usize,
) -> IonpumpStatus {
    guard(|| {
        let ev = &borrow(series, "series")?.events;
        copy_out(ev.iter().map(|e| e.time), ev.len(), buf, len)
    })
}

unsafe fn copy_out(src: impl Iterator<Item = f64>, n: usize, buf: *mut f64, len: usize) -> Result<(), Failure> {
    if n == 0 {
        return Ok(());
    }
    if buf.is_null() {
        return Err(null("buffer"));
    }
    if len < n {
        return Err((IonpumpStatus::InvalidArgument, format!("buffer holds {len} values, need {n}")));
    }
    for (i, v) in src.enumerate() {
        *buf.add(i) = v;
    }
    Ok(())
}

/// # Safety
/// `series` is null or a live series handle.
#[no_mangle]
pub unsafe extern "C" fn ionpump_series_free(series: *mut IonpumpSeries) {
    if !series.is_null() {
        drop(Box::from_raw(series));
    }
}

/// Reads the last error message as an owned Rust string; for tests and Rust
/// callers of the C layer.
pub fn last_error() -> Option<String> {
    let p = ionpump_last_error_message();
    // SAFETY: non-null pointers come from the thread-local CString.
    (!p.is_null()).then(|| unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned())
}
