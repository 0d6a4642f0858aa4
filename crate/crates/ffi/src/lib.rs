//! C ABI for `mmse-uplink`.
//!
//! Handles are opaque and owned by the caller once returned; release them with
//! the matching `*_free` function. Every fallible call returns a [`MuStatus`]
//! and, on failure, leaves a message for [`mu_last_error_message`] on the
//! calling thread. Outputs are written only on success.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use mmse_uplink::asymptotics::{beta_closed_form, solve_beta, AsymptoticParams, SeApproximation};
use mmse_uplink::config::ScenarioConfig;
use mmse_uplink::montecarlo::{run_experiment, ExperimentSummary, Scenario};
use mmse_uplink::powerctl::{power_distribution, representative_q_cdf};
use mmse_uplink::{Error, ScenarioParams};

#[repr(i32)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MuStatus {
    Ok = 0,
    NullPointer = 1,
    /// Bad configuration or argument.
    InvalidArgument = 2,
    /// Solver, quadrature or covariance failure.
    Numerical = 3,
    Io = 4,
    OutOfRange = 5,
    /// A Rust panic was caught at the boundary.
    Panic = 6,
}

/// A parsed scenario file: one entry per (policy, N) pair.
pub struct MuScenario {
    config: ScenarioConfig,
    scenarios: Vec<ScenarioParams>,
}

/// Result of a Monte Carlo experiment.
pub struct MuSummary {
    summary: ExperimentSummary,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MuScenarioInfo {
    pub n_antennas: usize,
    pub n_mobiles: usize,
    pub c: f64,
    pub disk_radius: f64,
    pub alpha: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MuStats {
    pub trials: usize,
    pub rejected: usize,
    pub mean_se: f64,
    pub std_se: f64,
    pub mean_beta_n: f64,
    pub std_beta_n: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(err: &Error) -> MuStatus {
    match err {
        Error::Io(_) => MuStatus::Io,
        e if e.is_numerical() => MuStatus::Numerical,
        _ => MuStatus::InvalidArgument,
    }
}

fn fail(status: MuStatus, msg: impl Into<String>) -> MuStatus {
    set_error(msg);
    status
}

/// Runs `f`, mapping errors and panics to status codes.
fn guard<F: FnOnce() -> Result<(), MuStatus>>(f: F) -> MuStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MuStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => fail(MuStatus::Panic, "panic inside mmse-uplink"),
    }
}

fn check<T>(r: mmse_uplink::Result<T>) -> Result<T, MuStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, MuStatus> {
    p.as_ref()
        .ok_or_else(|| fail(MuStatus::NullPointer, format!("{what} is null")))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, MuStatus> {
    p.as_mut()
        .ok_or_else(|| fail(MuStatus::NullPointer, format!("{what} is null")))
}

fn params_at(s: &MuScenario, index: usize) -> Result<&ScenarioParams, MuStatus> {
    s.scenarios.get(index).ok_or_else(|| {
        fail(
            MuStatus::OutOfRange,
            format!("scenario index {index} out of range (have {})", s.scenarios.len()),
        )
    })
}

/// Message of the last failure on this thread; empty if none. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn mu_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mu_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses a JSON scenario document.
///
/// # Safety
/// `json` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mu_scenario_from_json(json: *const c_char, out_handle: *mut *mut MuScenario) -> MuStatus {
    guard(|| {
        let text = deref(json, "json")?;
        let slot = out(out_handle, "out")?;
        let text = CStr::from_ptr(text)
            .to_str()
            .map_err(|e| fail(MuStatus::InvalidArgument, format!("json is not UTF-8: {e}")))?;
        let config = check(ScenarioConfig::from_json(text, "<json>"))?;
        let scenarios = config.scenarios();
        *slot = Box::into_raw(Box::new(MuScenario { config, scenarios }));
        Ok(())
    })
}

/// # Safety
/// `handle` must be null or come from [`mu_scenario_from_json`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mu_scenario_free(handle: *mut MuScenario) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Number of (policy, N) scenarios in the handle; 0 for null.
///
/// # Safety
/// `handle` must be null or a live scenario handle.
#[no_mangle]
pub unsafe extern "C" fn mu_scenario_count(handle: *const MuScenario) -> usize {
    handle.as_ref().map_or(0, |s| s.scenarios.len())
}

/// # Safety
/// `handle` must be a live scenario handle and `info` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mu_scenario_info(
    handle: *const MuScenario,
    index: usize,
    info: *mut MuScenarioInfo,
) -> MuStatus {
    guard(|| {
        let s = deref(handle, "scenario")?;
        let info = out(info, "info")?;
        let p = params_at(s, index)?;
        *info = MuScenarioInfo {
            n_antennas: p.n_antennas,
            n_mobiles: p.n_mobiles(),
            c: p.c(),
            disk_radius: p.disk_radius,
            alpha: p.alpha,
        };
        Ok(())
    })
}

/// Fixed-point and closed-form limits of the normalised SIR.
///
/// # Safety
/// `handle` must be a live scenario handle; the outputs must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn mu_solve_beta(
    handle: *const MuScenario,
    index: usize,
    beta_fixed: *mut f64,
    beta_closed: *mut f64,
) -> MuStatus {
    guard(|| {
        let s = deref(handle, "scenario")?;
        let fixed_out = out(beta_fixed, "beta_fixed")?;
        let closed_out = out(beta_closed, "beta_closed")?;
        let p = params_at(s, index)?;
        let dist = check(power_distribution(p))?;
        let ap = check(AsymptoticParams::from_scenario(p))?;
        let fixed = check(solve_beta(&ap, &dist))?;
        let closed = check(beta_closed_form(&ap, &dist))?;
        *fixed_out = fixed.beta;
        *closed_out = closed.beta;
        Ok(())
    })
}

fn approximation(p: &ScenarioParams) -> Result<SeApproximation, MuStatus> {
    let dist = check(power_distribution(p))?;
    let ap = check(AsymptoticParams::from_scenario(p))?;
    check(SeApproximation::new(p.n_antennas, &ap, &dist))
}

/// Large-system spectral efficiency of a link with power `p0` at distance `r0`.
///
/// # Safety
/// `handle` must be a live scenario handle and `se` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mu_asymptotic_se(
    handle: *const MuScenario,
    index: usize,
    p0: f64,
    r0: f64,
    se: *mut f64,
) -> MuStatus {
    guard(|| {
        let s = deref(handle, "scenario")?;
        let se = out(se, "se")?;
        let p = params_at(s, index)?;
        if !(p0 > 0.0 && r0 > 0.0) {
            return Err(fail(MuStatus::InvalidArgument, "p0 and r0 must be positive"));
        }
        *se = approximation(p)?.se(p0 * r0.powf(-p.alpha));
        Ok(())
    })
}

/// Approximate CDF of the representative's spectral efficiency at `gamma`.
///
/// # Safety
/// `handle` must be a live scenario handle and `prob` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mu_se_cdf(handle: *const MuScenario, index: usize, gamma: f64, prob: *mut f64) -> MuStatus {
    guard(|| {
        let s = deref(handle, "scenario")?;
        let prob = out(prob, "prob")?;
        let p = params_at(s, index)?;
        let fq = check(representative_q_cdf(p))?;
        *prob = approximation(p)?.cdf(gamma, &fq);
        Ok(())
    })
}

/// Runs `trials` Monte Carlo trials (0 uses the count from the scenario file).
/// Results depend only on the scenario and `seed`, not on `workers`.
///
/// # Safety
/// `handle` must be a live scenario handle and `out_summary` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mu_run_experiment(
    handle: *const MuScenario,
    index: usize,
    trials: usize,
    seed: u64,
    workers: usize,
    out_summary: *mut *mut MuSummary,
) -> MuStatus {
    guard(|| {
        let s = deref(handle, "scenario")?;
        let slot = out(out_summary, "out")?;
        let p = params_at(s, index)?;
        let trials = if trials == 0 { s.config.trials } else { trials };
        let scenario = check(Scenario::new(p.clone()))?;
        let summary = check(run_experiment(&scenario, trials, seed, workers.max(1)))?;
        *slot = Box::into_raw(Box::new(MuSummary { summary }));
        Ok(())
    })
}

/// # Safety
/// `handle` must be null or come from [`mu_run_experiment`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mu_summary_free(handle: *mut MuSummary) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// # Safety
/// `handle` must be a live summary handle and `stats` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mu_summary_stats(handle: *const MuSummary, stats: *mut MuStats) -> MuStatus {
    guard(|| {
        let s = &deref(handle, "summary")?.summary;
        let stats = out(stats, "stats")?;
        *stats = MuStats {
            trials: s.trials.len(),
            rejected: s.rejected,
            mean_se: s.se.mean,
            std_se: s.se.std,
            mean_beta_n: s.beta_n.mean,
            std_beta_n: s.beta_n.std,
        };
        Ok(())
    })
}

/// Copies up to `len` sorted spectral-efficiency samples into `buf` and
/// stores the total sample count in `total`. `buf` may be null when `len` is 0.
///
/// # Safety
/// `handle` must be a live summary handle, `buf` valid for `len` writes and
/// `total` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mu_summary_se_samples(
    handle: *const MuSummary,
    buf: *mut f64,
    len: usize,
    total: *mut usize,
) -> MuStatus {
    guard(|| {
        let s = &deref(handle, "summary")?.summary;
        let total = out(total, "total")?;
        let samples = s.se_ecdf.samples();
        if len > 0 {
            if buf.is_null() {
                return Err(fail(MuStatus::NullPointer, "buf is null"));
            }
            let n = len.min(samples.len());
            std::ptr::copy_nonoverlapping(samples.as_ptr(), buf, n);
        }
        *total = samples.len();
        Ok(())
    })
}
