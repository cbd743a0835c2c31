//! C ABI over the satrelay simulator.
//!
//! Every function returns an [`SrStatus`]; on failure the message is
//! available from [`sr_last_error_message`] on the same thread. Handles are
//! opaque and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use satrelay::channel::{link_capacity, RadioParams};
use satrelay::config::RunConfig;
use satrelay::env::Env;
use satrelay::neural::MlpParams;
use satrelay::{Error, ScenarioConfig};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidConfig = 3,
    EpisodeFinished = 4,
    OutOfRange = 5,
    Io = 6,
    Checkpoint = 7,
    DimensionMismatch = 8,
    Panic = 9,
}

/// Simulation environment handle.
pub struct SrEnv {
    env: Env,
}

/// Trained Q-network handle.
pub struct SrPolicy {
    params: MlpParams,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &Error) -> SrStatus {
    match e {
        Error::InvalidConfig { .. } | Error::Parse { .. } | Error::EmptyGrid => {
            SrStatus::InvalidConfig
        }
        Error::EpisodeFinished { .. } => SrStatus::EpisodeFinished,
        Error::ActionOutOfRange { .. } => SrStatus::OutOfRange,
        Error::Io { .. } => SrStatus::Io,
        Error::Checkpoint(_) => SrStatus::Checkpoint,
        Error::DimensionMismatch { .. } => SrStatus::DimensionMismatch,
        _ => SrStatus::InvalidArgument,
    }
}

fn guard(f: impl FnOnce() -> Result<(), SrStatus>) -> SrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SrStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic");
            SrStatus::Panic
        }
    }
}

fn fail(e: Error) -> SrStatus {
    let s = status_of(&e);
    set_error(e.to_string());
    s
}

fn null(what: &str) -> SrStatus {
    set_error(format!("`{what}` is null"));
    SrStatus::NullPointer
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, SrStatus> {
    if p.is_null() {
        return Err(null("path"));
    }
    let s = CStr::from_ptr(p).to_str().map_err(|_| {
        set_error("path is not valid UTF-8");
        SrStatus::InvalidArgument
    })?;
    Ok(PathBuf::from(s))
}

fn boxed<T>(out: *mut *mut T, value: T) {
    // SAFETY: callers check `out` for null first.
    unsafe { *out = Box::into_raw(Box::new(value)) };
}

/// Message for the most recent failure on this thread, or null. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sr_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Shannon capacity in bps of a link of length `distance_m`.
///
/// # Safety
/// `out` must be null or point to writable storage for one `double`.
#[no_mangle]
pub unsafe extern "C" fn sr_link_capacity(
    distance_m: f64,
    reference_snr: f64,
    pathloss_exponent: f64,
    bandwidth_hz: f64,
    out: *mut f64,
) -> SrStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let rp = RadioParams {
            bandwidth: bandwidth_hz,
            reference_snr,
            pathloss_exponent,
        };
        rp.validate().map_err(fail)?;
        *out = link_capacity(distance_m, &rp).map_err(fail)?;
        Ok(())
    })
}

fn new_env(cfg: ScenarioConfig, out: *mut *mut SrEnv) -> Result<(), SrStatus> {
    let env = Env::new(cfg).map_err(fail)?;
    boxed(out, SrEnv { env });
    Ok(())
}

/// Environment with the built-in scenario. Calibrates the reward, which
/// runs the fixed-HAP sweep once.
///
/// # Safety
/// `out` must be null or point to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn sr_env_new_default(out: *mut *mut SrEnv) -> SrStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        new_env(ScenarioConfig::default(), out)
    })
}

/// Environment from a TOML configuration file.
///
/// # Safety
/// `config_path` must be null or a NUL-terminated string; `out` must be
/// null or point to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn sr_env_new_from_file(
    config_path: *const c_char,
    out: *mut *mut SrEnv,
) -> SrStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = path_arg(config_path)?;
        let rc = RunConfig::load(&path).map_err(fail)?;
        new_env(rc.scenario, out)
    })
}

/// # Safety
/// `env` must be null or a handle from an `sr_env_new_*` call that has not
/// been freed.
#[no_mangle]
pub unsafe extern "C" fn sr_env_free(env: *mut SrEnv) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// # Safety
/// `env` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sr_env_observation_dim(env: *const SrEnv, out: *mut usize) -> SrStatus {
    guard(|| {
        let env = env.as_ref().ok_or_else(|| null("env"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = env.env.observation_dim();
        Ok(())
    })
}

/// # Safety
/// `env` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sr_env_action_count(env: *const SrEnv, out: *mut usize) -> SrStatus {
    guard(|| {
        let env = env.as_ref().ok_or_else(|| null("env"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = env.env.action_count();
        Ok(())
    })
}

unsafe fn write_obs(src: &[f64], obs: *mut f64, len: usize) -> Result<(), SrStatus> {
    if obs.is_null() {
        return Err(null("obs"));
    }
    if len != src.len() {
        return Err(fail(Error::DimensionMismatch {
            context: "observation buffer",
            expected: src.len(),
            actual: len,
        }));
    }
    std::slice::from_raw_parts_mut(obs, len).copy_from_slice(src);
    Ok(())
}

/// Restarts the episode and writes the first observation.
///
/// # Safety
/// `env` must be a live handle; `obs` must hold `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn sr_env_reset(env: *mut SrEnv, obs: *mut f64, len: usize) -> SrStatus {
    guard(|| {
        let env = env.as_mut().ok_or_else(|| null("env"))?;
        let o = env.env.reset();
        write_obs(o.as_slice(), obs, len)
    })
}

/// Advances one slot. `e2e_rate` may be null.
///
/// # Safety
/// `env` must be a live handle; `obs` must hold `len` writable doubles;
/// `reward` and `done` must be writable; `e2e_rate` must be null or
/// writable.
#[no_mangle]
pub unsafe extern "C" fn sr_env_step(
    env: *mut SrEnv,
    action: usize,
    obs: *mut f64,
    len: usize,
    reward: *mut f64,
    done: *mut bool,
    e2e_rate: *mut f64,
) -> SrStatus {
    guard(|| {
        let env = env.as_mut().ok_or_else(|| null("env"))?;
        let reward = reward.as_mut().ok_or_else(|| null("reward"))?;
        let done = done.as_mut().ok_or_else(|| null("done"))?;
        if obs.is_null() {
            return Err(null("obs"));
        }
        if len != env.env.observation_dim() {
            return Err(fail(Error::DimensionMismatch {
                context: "observation buffer",
                expected: env.env.observation_dim(),
                actual: len,
            }));
        }
        let out = env.env.step(action).map_err(fail)?;
        write_obs(out.observation.as_slice(), obs, len)?;
        *reward = out.reward;
        *done = out.done;
        if let Some(r) = e2e_rate.as_mut() {
            *r = out.info.record.e2e;
        }
        Ok(())
    })
}

/// Loads a JSON checkpoint.
///
/// # Safety
/// `checkpoint_path` must be null or a NUL-terminated string; `out` must be
/// null or point to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn sr_policy_load(
    checkpoint_path: *const c_char,
    out: *mut *mut SrPolicy,
) -> SrStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = path_arg(checkpoint_path)?;
        let params = MlpParams::load(&path).map_err(fail)?;
        boxed(out, SrPolicy { params });
        Ok(())
    })
}

/// # Safety
/// `policy` must be null or a handle from [`sr_policy_load`] that has not
/// been freed.
#[no_mangle]
pub unsafe extern "C" fn sr_policy_free(policy: *mut SrPolicy) {
    if !policy.is_null() {
        drop(Box::from_raw(policy));
    }
}

/// Greedy action for an observation; ties go to the lowest index.
///
/// # Safety
/// `policy` must be a live handle; `obs` must hold `len` readable doubles;
/// `action` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sr_policy_act(
    policy: *const SrPolicy,
    obs: *const f64,
    len: usize,
    action: *mut usize,
) -> SrStatus {
    guard(|| {
        let policy = policy.as_ref().ok_or_else(|| null("policy"))?;
        let action = action.as_mut().ok_or_else(|| null("action"))?;
        if obs.is_null() {
            return Err(null("obs"));
        }
        let x = std::slice::from_raw_parts(obs, len);
        let q = policy.params.forward(x).map_err(fail)?;
        *action = satrelay::agent::argmax(&q);
        Ok(())
    })
}
