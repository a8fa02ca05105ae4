//! C ABI over the `selfish-rewards` engine.
//!
//! Every function returns an [`SrStatus`]. On failure a message describing
//! the error is stored per thread and can be read with
//! [`sr_last_error_message`]. Reward specifications live behind the opaque
//! [`SrRewardSpec`] handle, which the caller frees with [`sr_spec_free`].
//! Panics never cross the boundary; they surface as `SR_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use selfish_rewards::{
    honest_benchmark, optimize_beta, profitability_threshold, simulate, solve_equilibrium, AttackerParams, Error,
    LambdaMode, Objective, RewardBreakdown, RewardSpec, SimConfig,
};

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NonConvergence = 3,
    ParseError = 4,
    NotFound = 5,
    Panic = 6,
}

/// Bit for the block-reward component in an objective mask.
pub const SR_OBJECTIVE_BLOCK: u32 = 1;
/// Bit for the linear fee component in an objective mask.
pub const SR_OBJECTIVE_LINEAR: u32 = 2;
/// Bit for the Bernoulli bonus component in an objective mask.
pub const SR_OBJECTIVE_BERNOULLI: u32 = 4;
/// All components.
pub const SR_OBJECTIVE_TOTAL: u32 = 7;

/// How the simulator sets the block-production rate.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SrLambdaMode {
    Analytic = 0,
    SelfCalibrating = 1,
    Fixed = 2,
}

/// Opaque reward specification.
pub struct SrRewardSpec {
    inner: RewardSpec,
}

/// Reward rates split by source.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SrBreakdown {
    pub block: f64,
    pub linear: f64,
    pub bernoulli: f64,
    pub total: f64,
}

impl From<RewardBreakdown> for SrBreakdown {
    fn from(b: RewardBreakdown) -> Self {
        Self {
            block: b.block,
            linear: b.linear,
            bernoulli: b.bernoulli,
            total: b.total,
        }
    }
}

/// Self-consistent orphan rate and the stationary distribution behind it.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SrEquilibrium {
    pub lambda: f64,
    /// Probability that a fresh attacker block in state 0 is withheld.
    pub hide_probability: f64,
    pub p0: f64,
    pub p0_prime: f64,
    pub p0_dprime: f64,
    pub p1: f64,
    /// Ratio between consecutive lead states beyond 1.
    pub tail_ratio: f64,
    pub iterations: u32,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SrOptimization {
    pub beta_star: f64,
    pub objective_value: f64,
    pub honest_value: f64,
    pub lambda: f64,
    /// Every component at `beta_star`, per unit time.
    pub breakdown: SrBreakdown,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SrSimulation {
    pub attacker: SrBreakdown,
    pub attacker_se: SrBreakdown,
    pub honest: SrBreakdown,
    pub honest_se: SrBreakdown,
    pub orphan_rate: f64,
    pub orphan_rate_se: f64,
    pub growth_rate: f64,
    pub growth_rate_se: f64,
    pub lambda_used: f64,
    pub events: u64,
    pub elapsed_time: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    let c = CString::new(msg).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Failure(SrStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::InvalidParameter { .. } | Error::InvalidSpec(_) => SrStatus::InvalidArgument,
            Error::NonConvergence { .. } | Error::CalibrationFailed { .. } => SrStatus::NonConvergence,
        };
        Failure(status, e.to_string())
    }
}

fn null(name: &str) -> Failure {
    Failure(SrStatus::NullPointer, format!("{name} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SrStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SrStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            SrStatus::Panic
        }
    }
}

unsafe fn spec_ref<'a>(spec: *const SrRewardSpec) -> Result<&'a RewardSpec, Failure> {
    spec.as_ref().map(|s| &s.inner).ok_or_else(|| null("spec"))
}

unsafe fn write_out<T>(out: *mut T, value: T, name: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(name));
    }
    out.write(value);
    Ok(())
}

fn objective_from_mask(mask: u32) -> Result<Objective, Failure> {
    if mask & !SR_OBJECTIVE_TOTAL != 0 {
        return Err(Failure(
            SrStatus::InvalidArgument,
            format!("unknown objective bits in {mask:#x}"),
        ));
    }
    Ok(Objective::new(
        mask & SR_OBJECTIVE_BLOCK != 0,
        mask & SR_OBJECTIVE_LINEAR != 0,
        mask & SR_OBJECTIVE_BERNOULLI != 0,
    )?)
}

fn box_spec(spec: RewardSpec, out: *mut *mut SrRewardSpec) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    let handle = Box::into_raw(Box::new(SrRewardSpec { inner: spec }));
    // SAFETY: checked non-null above; the caller promises it is writable.
    unsafe { out.write(handle) };
    Ok(())
}

/// Builds the reward `C + a·t + Bernoulli(p)·E`. Pass zero to drop a
/// component.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn sr_spec_standard(c: f64, a: f64, p: f64, e: f64, out: *mut *mut SrRewardSpec) -> SrStatus {
    guard(|| box_spec(RewardSpec::standard(c, a, p, e)?, out))
}

/// Parses a reward specification from JSON, for example
/// `{"constant": 1, "linear": 0.5, "bernoulli": {"p": 0.25, "e": 4}}`.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer to
/// writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn sr_spec_from_json(json: *const c_char, out: *mut *mut SrRewardSpec) -> SrStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| Failure(SrStatus::ParseError, format!("json is not UTF-8: {e}")))?;
        let spec: RewardSpec =
            serde_json::from_str(text).map_err(|e| Failure(SrStatus::ParseError, format!("bad reward spec: {e}")))?;
        box_spec(spec, out)
    })
}

/// Serializes a spec to JSON. Release the string with [`sr_string_free`].
///
/// # Safety
/// `spec` must come from this library and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sr_spec_to_json(spec: *const SrRewardSpec, out: *mut *mut c_char) -> SrStatus {
    guard(|| {
        let spec = spec_ref(spec)?;
        let text = serde_json::to_string(spec).map_err(|e| Failure(SrStatus::ParseError, e.to_string()))?;
        let c = CString::new(text).map_err(|e| Failure(SrStatus::ParseError, e.to_string()))?;
        write_out(out, c.into_raw(), "out")
    })
}

/// Frees a spec handle. Null is a no-op.
///
/// # Safety
/// `spec` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sr_spec_free(spec: *mut SrRewardSpec) {
    if !spec.is_null() {
        drop(Box::from_raw(spec));
    }
}

/// Frees a string returned by this library. Null is a no-op.
///
/// # Safety
/// `s` must be null or a string from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sr_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Solves for the equilibrium orphan rate. Use `INFINITY` for `beta` to
/// always withhold.
///
/// # Safety
/// `spec` must come from this library and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sr_solve_equilibrium(
    spec: *const SrRewardSpec,
    alpha: f64,
    gamma: f64,
    beta: f64,
    out: *mut SrEquilibrium,
) -> SrStatus {
    guard(|| {
        let spec = spec_ref(spec)?;
        let eq = solve_equilibrium(spec, &AttackerParams::new(alpha, gamma, beta)?)?;
        let st = eq.stationary;
        write_out(
            out,
            SrEquilibrium {
                lambda: eq.lambda,
                hide_probability: eq.h,
                p0: st.p0,
                p0_prime: st.p0_prime,
                p0_dprime: st.p0_dprime,
                p1: st.p1,
                tail_ratio: st.tail_ratio,
                iterations: eq.iterations as u32,
            },
            "out",
        )
    })
}

/// Attacker reward per unit time at the equilibrium.
///
/// # Safety
/// `spec` must come from this library and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sr_attacker_reward(
    spec: *const SrRewardSpec,
    alpha: f64,
    gamma: f64,
    beta: f64,
    out: *mut SrBreakdown,
) -> SrStatus {
    guard(|| {
        let spec = spec_ref(spec)?;
        let r = selfish_rewards::attacker_reward(spec, &AttackerParams::new(alpha, gamma, beta)?)?;
        write_out(out, r.into(), "out")
    })
}

/// Reward per unit time of an honest miner with hashrate `alpha`.
///
/// # Safety
/// `spec` must come from this library and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sr_honest_benchmark(spec: *const SrRewardSpec, alpha: f64, out: *mut SrBreakdown) -> SrStatus {
    guard(|| {
        let spec = spec_ref(spec)?;
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Failure(
                SrStatus::InvalidArgument,
                format!("alpha = {alpha} must lie in [0, 1]"),
            ));
        }
        write_out(out, honest_benchmark(spec, alpha).into(), "out")
    })
}

/// Finds the cutoff maximizing the components selected by `objective_mask`.
///
/// # Safety
/// `spec` must come from this library and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sr_optimize_beta(
    spec: *const SrRewardSpec,
    alpha: f64,
    gamma: f64,
    objective_mask: u32,
    out: *mut SrOptimization,
) -> SrStatus {
    guard(|| {
        let spec = spec_ref(spec)?;
        let r = optimize_beta(spec, alpha, gamma, objective_from_mask(objective_mask)?)?;
        write_out(
            out,
            SrOptimization {
                beta_star: r.beta_star,
                objective_value: r.objective_value,
                honest_value: r.honest_value,
                lambda: r.lambda,
                breakdown: r.full_breakdown.into(),
            },
            "out",
        )
    })
}

/// Smallest hashrate at which the best cutoff beats honest mining.
/// Returns `SR_STATUS_NOT_FOUND` when no hashrate below one half is
/// profitable.
///
/// # Safety
/// `spec` must come from this library and `out_alpha` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sr_profitability_threshold(
    spec: *const SrRewardSpec,
    gamma: f64,
    objective_mask: u32,
    out_alpha: *mut f64,
) -> SrStatus {
    guard(|| {
        let spec = spec_ref(spec)?;
        if out_alpha.is_null() {
            return Err(null("out_alpha"));
        }
        match profitability_threshold(spec, gamma, objective_from_mask(objective_mask)?)? {
            Some(a) => write_out(out_alpha, a, "out_alpha"),
            None => Err(Failure(SrStatus::NotFound, "no profitable hashrate below 0.5".into())),
        }
    })
}

/// Monte Carlo run with `replicas` independent streams of `events` block
/// events each. `mode` is one of the [`SrLambdaMode`] values; `fixed_lambda`
/// is read only for `SR_LAMBDA_MODE_FIXED`.
///
/// # Safety
/// `spec` must come from this library and `out` must be writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn sr_simulate(
    spec: *const SrRewardSpec,
    alpha: f64,
    gamma: f64,
    beta: f64,
    events: u64,
    replicas: u32,
    seed: u64,
    mode: u32,
    fixed_lambda: f64,
    out: *mut SrSimulation,
) -> SrStatus {
    guard(|| {
        let spec = spec_ref(spec)?;
        let mut cfg = SimConfig::new(spec.clone(), AttackerParams::new(alpha, gamma, beta)?);
        cfg.horizon_events = events;
        cfg.replicas = replicas;
        cfg.seed = seed;
        cfg.lambda_mode = match mode {
            m if m == SrLambdaMode::Analytic as u32 => LambdaMode::Analytic,
            m if m == SrLambdaMode::SelfCalibrating as u32 => LambdaMode::SelfCalibrating,
            m if m == SrLambdaMode::Fixed as u32 => LambdaMode::Fixed(fixed_lambda),
            m => return Err(Failure(SrStatus::InvalidArgument, format!("unknown lambda mode {m}"))),
        };
        let r = simulate(&cfg)?;
        write_out(
            out,
            SrSimulation {
                attacker: r.attacker.into(),
                attacker_se: r.attacker_se.into(),
                honest: r.honest.into(),
                honest_se: r.honest_se.into(),
                orphan_rate: r.empirical_orphan_rate.value,
                orphan_rate_se: r.empirical_orphan_rate.se,
                growth_rate: r.canonical_growth_rate.value,
                growth_rate_se: r.canonical_growth_rate.se,
                lambda_used: r.lambda_used,
                events: r.events,
                elapsed_time: r.elapsed_sim_time,
            },
            "out",
        )
    })
}

/// Message for the last failed call on this thread, or null if the last
/// call succeeded. The pointer stays valid until the next call into this
/// library on the same thread.
#[no_mangle]
pub extern "C" fn sr_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
