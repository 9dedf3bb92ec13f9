//! C ABI over the `devilstick` crate.
//!
//! Every entry point returns a [`DsStatus`]. On failure the message is kept
//! per thread and can be fetched with [`ds_last_error_message`]. Handles are
//! opaque and must be released with the matching `*_free` function.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use devilstick::dvhc::{dvhc_control, RodPolicy};
use devilstick::dynamics::{advance, hybrid_step};
use devilstick::dzd::{design_orbit, orbit_inputs, symmetric_omega_star, OrbitSpec};
use devilstick::harness::{run_episode, EpisodeConfig, EpisodeLog, Termination};
use devilstick::model::validate;
use devilstick::stabilizer::{LinearizeOptions, Stabilizer, StabilizerDesign, INPUT_DIM, STATE_DIM};
use devilstick::{Error, FullState, ImpulseCmd, ImpulseIndex, JuggleSpec, StickParams};

pub const DS_ABI_VERSION: u32 = 1;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NonFinite = 3,
    Infeasible = 4,
    Degenerate = 5,
    Singular = 6,
    WrongRotationSign = 7,
    OffSchedule = 8,
    NoPositiveRoot = 9,
    RodExceeded = 10,
    NoOrbit = 11,
    Linearization = 12,
    Riccati = 13,
    OutOfRange = 14,
    Panic = 99,
}

impl From<&Error> for DsStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::NonFinite(_) => DsStatus::NonFinite,
            Error::NegativeDuration(_)
            | Error::BadSampleInterval(_)
            | Error::Dimension(_)
            | Error::EmptyLog
            | Error::Invalid(_) => DsStatus::InvalidArgument,
            Error::Infeasible { .. } => DsStatus::Infeasible,
            Error::Degenerate(_) => DsStatus::Degenerate,
            Error::Singular(_) => DsStatus::Singular,
            Error::WrongRotationSign { .. } => DsStatus::WrongRotationSign,
            Error::OffSchedule { .. } | Error::NotOnSection { .. } => DsStatus::OffSchedule,
            Error::NoPositiveRoot { .. } => DsStatus::NoPositiveRoot,
            Error::RodExceeded { .. } => DsStatus::RodExceeded,
            Error::AsymmetricSpec | Error::WrongSign(_) => DsStatus::NoOrbit,
            Error::FdInconsistent { .. } => DsStatus::Linearization,
            Error::RiccatiDiverged(_) | Error::NotStabilizing(_) => DsStatus::Riccati,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn fail(status: DsStatus, msg: impl Into<String>) -> DsStatus {
    set_error(msg.into());
    status
}

fn from_err(e: Error) -> DsStatus {
    fail(DsStatus::from(&e), e.to_string())
}

/// Runs `f`, clearing the last error first and turning panics into `Panic`.
fn guard(f: impl FnOnce() -> DsStatus) -> DsStatus {
    set_error(String::new());
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(DsStatus::Panic, msg)
        }
    }
}

macro_rules! try_ds {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(err) => return from_err(err),
        }
    };
}

macro_rules! deref {
    ($p:expr, $name:literal) => {
        match unsafe { $p.as_ref() } {
            Some(v) => v,
            None => return fail(DsStatus::NullPointer, concat!($name, " is null")),
        }
    };
}

macro_rules! out {
    ($p:expr, $name:literal) => {
        match unsafe { $p.as_mut() } {
            Some(v) => v,
            None => return fail(DsStatus::NullPointer, concat!($name, " is null")),
        }
    };
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct DsParams {
    pub m: f64,
    pub ell: f64,
    pub j: f64,
    pub g: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct DsSpec {
    pub theta_odd: f64,
    pub theta_even: f64,
    pub alpha: f64,
    pub beta: f64,
    pub lambda_x: f64,
    pub lambda_y: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct DsState {
    pub hx: f64,
    pub hy: f64,
    pub theta: f64,
    pub vx: f64,
    pub vy: f64,
    pub omega: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct DsCommand {
    pub impulse: f64,
    pub offset: f64,
    pub delta: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct DsOrbit {
    pub omega_star: f64,
    pub omega_even: f64,
    pub delta_odd: f64,
    pub delta_even: f64,
    pub impulse_mag: f64,
    pub r_star: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct DsStepRecord {
    pub k: u32,
    pub t: f64,
    pub theta: f64,
    pub omega: f64,
    pub rho_x: f64,
    pub rho_y: f64,
    pub drho_x: f64,
    pub drho_y: f64,
    pub delta: f64,
    pub impulse: f64,
    pub offset: f64,
    /// Zero when no correction was applied.
    pub u_impulse: f64,
    pub u_offset: f64,
}

impl From<&DsParams> for StickParams {
    fn from(p: &DsParams) -> Self {
        StickParams {
            m: p.m,
            ell: p.ell,
            j: p.j,
            g: p.g,
        }
    }
}

impl From<&DsSpec> for JuggleSpec {
    fn from(s: &DsSpec) -> Self {
        JuggleSpec {
            theta_odd: s.theta_odd,
            theta_even: s.theta_even,
            alpha: s.alpha,
            beta: s.beta,
            lambda_x: s.lambda_x,
            lambda_y: s.lambda_y,
        }
    }
}

impl From<&DsState> for FullState {
    fn from(s: &DsState) -> Self {
        FullState::new(s.hx, s.hy, s.theta, s.vx, s.vy, s.omega)
    }
}

impl From<&FullState> for DsState {
    fn from(s: &FullState) -> Self {
        DsState {
            hx: s.h.x,
            hy: s.h.y,
            theta: s.theta,
            vx: s.v.x,
            vy: s.v.y,
            omega: s.omega,
        }
    }
}

impl From<&OrbitSpec> for DsOrbit {
    fn from(o: &OrbitSpec) -> Self {
        DsOrbit {
            omega_star: o.omega_star,
            omega_even: o.omega_even,
            delta_odd: o.delta_odd,
            delta_even: o.delta_even,
            impulse_mag: o.impulse_mag,
            r_star: o.r_star,
        }
    }
}

/// Stick parameters together with a validated constraint specification.
pub struct DsModel {
    params: StickParams,
    spec: JuggleSpec,
}

pub struct DsStabilizer {
    inner: Stabilizer,
}

pub struct DsEpisode {
    log: EpisodeLog,
}

fn index(k: u32) -> Result<ImpulseIndex, DsStatus> {
    ImpulseIndex::new(k).map_err(from_err)
}

#[no_mangle]
pub extern "C" fn ds_abi_version() -> u32 {
    DS_ABI_VERSION
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len - 1` bytes). Returns the full message length, so a
/// caller can size the buffer with a first call passing `len = 0`.
#[no_mangle]
pub unsafe extern "C" fn ds_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Uniform rod of mass `m` and length `ell` under standard gravity.
#[no_mangle]
pub unsafe extern "C" fn ds_params_uniform_rod(m: f64, ell: f64, out: *mut DsParams) -> DsStatus {
    guard(|| {
        let out = out!(out, "out");
        let p = StickParams::uniform_rod(m, ell);
        *out = DsParams {
            m: p.m,
            ell: p.ell,
            j: p.j,
            g: p.g,
        };
        DsStatus::Ok
    })
}

/// Symmetric specification: `theta_even = pi - theta_odd`.
#[no_mangle]
pub unsafe extern "C" fn ds_spec_symmetric(
    theta_odd: f64,
    alpha: f64,
    beta: f64,
    lambda: f64,
    out: *mut DsSpec,
) -> DsStatus {
    guard(|| {
        let out = out!(out, "out");
        let s = JuggleSpec::symmetric(theta_odd, alpha, beta, lambda);
        *out = DsSpec {
            theta_odd: s.theta_odd,
            theta_even: s.theta_even,
            alpha: s.alpha,
            beta: s.beta,
            lambda_x: s.lambda_x,
            lambda_y: s.lambda_y,
        };
        DsStatus::Ok
    })
}

/// Validates and stores parameters and specification in a new handle.
#[no_mangle]
pub unsafe extern "C" fn ds_model_new(
    params: *const DsParams,
    spec: *const DsSpec,
    out: *mut *mut DsModel,
) -> DsStatus {
    guard(|| {
        let params = StickParams::from(deref!(params, "params"));
        let spec = JuggleSpec::from(deref!(spec, "spec"));
        let out = out!(out, "out");
        *out = ptr::null_mut();
        let report = validate(&spec, &params);
        if !report.all_pass() {
            let msgs: Vec<String> = report
                .failures()
                .map(|f| format!("{}: {}", f.field, f.detail))
                .collect();
            return fail(DsStatus::InvalidArgument, msgs.join("; "));
        }
        *out = Box::into_raw(Box::new(DsModel { params, spec }));
        DsStatus::Ok
    })
}

#[no_mangle]
pub unsafe extern "C" fn ds_model_free(model: *mut DsModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Constraint controller at impulse `k` (1-based). `strict_rod` rejects
/// offsets beyond the stick ends instead of only warning.
#[no_mangle]
pub unsafe extern "C" fn ds_dvhc_control(
    model: *const DsModel,
    state: *const DsState,
    k: u32,
    strict_rod: bool,
    out: *mut DsCommand,
) -> DsStatus {
    guard(|| {
        let model = deref!(model, "model");
        let s = FullState::from(deref!(state, "state"));
        let out = out!(out, "out");
        let k = match index(k) {
            Ok(k) => k,
            Err(st) => return st,
        };
        let policy = if strict_rod { RodPolicy::Strict } else { RodPolicy::Warn };
        let cmd = try_ds!(dvhc_control(&s, k, &model.spec, &model.params, policy));
        *out = DsCommand {
            impulse: cmd.impulse,
            offset: cmd.offset,
            delta: cmd.delta,
        };
        DsStatus::Ok
    })
}

/// One impulse followed by a flight of `cmd.delta` seconds.
#[no_mangle]
pub unsafe extern "C" fn ds_hybrid_step(
    params: *const DsParams,
    state: *const DsState,
    cmd: *const DsCommand,
    out: *mut DsState,
) -> DsStatus {
    guard(|| {
        let p = StickParams::from(deref!(params, "params"));
        let s = FullState::from(deref!(state, "state"));
        let c = deref!(cmd, "cmd");
        let out = out!(out, "out");
        let cmd = ImpulseCmd {
            impulse: c.impulse,
            offset: c.offset,
            delta: c.delta,
        };
        *out = DsState::from(&try_ds!(hybrid_step(&s, &cmd, &p)));
        DsStatus::Ok
    })
}

/// Applies `(impulse, offset)` at impulse `k` and flies to the next scheduled
/// orientation. `out_delta` may be null.
#[no_mangle]
pub unsafe extern "C" fn ds_advance(
    model: *const DsModel,
    state: *const DsState,
    k: u32,
    impulse: f64,
    offset: f64,
    out: *mut DsState,
    out_delta: *mut f64,
) -> DsStatus {
    guard(|| {
        let model = deref!(model, "model");
        let s = FullState::from(deref!(state, "state"));
        let out = out!(out, "out");
        let k = match index(k) {
            Ok(k) => k,
            Err(st) => return st,
        };
        let (next, delta) = try_ds!(advance(&s, k, impulse, offset, &model.spec, &model.params));
        *out = DsState::from(&next);
        if let Some(d) = out_delta.as_mut() {
            *d = delta;
        }
        DsStatus::Ok
    })
}

/// The orbit with odd-impulse rate `omega_star`. Pass NaN to get the
/// rate-symmetric orbit.
#[no_mangle]
pub unsafe extern "C" fn ds_design_orbit(
    model: *const DsModel,
    omega_star: f64,
    out: *mut DsOrbit,
) -> DsStatus {
    guard(|| {
        let model = deref!(model, "model");
        let out = out!(out, "out");
        let w = if omega_star.is_nan() {
            try_ds!(symmetric_omega_star(&model.spec, &model.params))
        } else {
            omega_star
        };
        let orbit = try_ds!(design_orbit(&model.spec, w, &model.params));
        let (_, r) = try_ds!(orbit_inputs(&orbit, &model.params));
        *out = DsOrbit {
            r_star: r,
            ..DsOrbit::from(&orbit)
        };
        DsStatus::Ok
    })
}

/// Linearizes the return map about the orbit at `omega_star` (NaN for the
/// symmetric one) and designs the LQR gain with `Q = I`, `R = 2 I`.
/// `coarse` selects one-sided differences with a fixed 2e-3 step; otherwise
/// central differences with a relative step are used.
#[no_mangle]
pub unsafe extern "C" fn ds_stabilizer_new(
    model: *const DsModel,
    omega_star: f64,
    coarse: bool,
    out: *mut *mut DsStabilizer,
) -> DsStatus {
    guard(|| {
        let model = deref!(model, "model");
        let out = out!(out, "out");
        *out = ptr::null_mut();
        let w = if omega_star.is_nan() {
            try_ds!(symmetric_omega_star(&model.spec, &model.params))
        } else {
            omega_star
        };
        let orbit = try_ds!(design_orbit(&model.spec, w, &model.params));
        let design = StabilizerDesign {
            fd: if coarse {
                LinearizeOptions::coarse_forward()
            } else {
                LinearizeOptions::default()
            },
            ..StabilizerDesign::default()
        };
        let inner = try_ds!(Stabilizer::synthesize(&orbit, &model.params, &design));
        *out = Box::into_raw(Box::new(DsStabilizer { inner }));
        DsStatus::Ok
    })
}

/// Copies the linearization and gain, row-major: `a[25]`, `b[10]` (5x2),
/// `k[10]` (2x5, `u = K (z - z*)`), `z_star[5]`. Any output may be null.
#[no_mangle]
pub unsafe extern "C" fn ds_stabilizer_matrices(
    stab: *const DsStabilizer,
    a: *mut f64,
    b: *mut f64,
    k: *mut f64,
    z_star: *mut f64,
) -> DsStatus {
    guard(|| {
        let stab = &deref!(stab, "stabilizer").inner;
        let copy = |dst: *mut f64, m: &nalgebra::DMatrix<f64>| {
            if dst.is_null() {
                return;
            }
            for (i, row) in m.row_iter().enumerate() {
                for (j, x) in row.iter().enumerate() {
                    *dst.add(i * m.ncols() + j) = *x;
                }
            }
        };
        debug_assert_eq!(stab.lin.a.shape(), (STATE_DIM, STATE_DIM));
        debug_assert_eq!(stab.lin.b.shape(), (STATE_DIM, INPUT_DIM));
        copy(a, &stab.lin.a);
        copy(b, &stab.lin.b);
        copy(k, &stab.gain.k);
        if !z_star.is_null() {
            for (i, x) in stab.lin.z_star.z.iter().enumerate() {
                *z_star.add(i) = *x;
            }
        }
        DsStatus::Ok
    })
}

/// Closed-loop spectral radius of `A + B K`.
#[no_mangle]
pub unsafe extern "C" fn ds_stabilizer_spectral_radius(
    stab: *const DsStabilizer,
    out: *mut f64,
) -> DsStatus {
    guard(|| {
        let stab = deref!(stab, "stabilizer");
        *out!(out, "out") = stab.inner.lqr.spectral_radius;
        DsStatus::Ok
    })
}

#[no_mangle]
pub unsafe extern "C" fn ds_stabilizer_free(stab: *mut DsStabilizer) {
    if !stab.is_null() {
        drop(Box::from_raw(stab));
    }
}

/// Runs up to `k_max` impulses from `state`, which must sit at `theta_odd`.
/// `stab` may be null. A failure inside the episode still yields a handle;
/// query it with [`ds_episode_status`].
#[no_mangle]
pub unsafe extern "C" fn ds_episode_run(
    model: *const DsModel,
    state: *const DsState,
    k_max: u32,
    stab: *const DsStabilizer,
    out: *mut *mut DsEpisode,
) -> DsStatus {
    guard(|| {
        let model = deref!(model, "model");
        let s0 = FullState::from(deref!(state, "state"));
        let out = out!(out, "out");
        *out = ptr::null_mut();
        if k_max == 0 {
            return fail(DsStatus::InvalidArgument, "k_max must be at least 1");
        }
        let cfg = EpisodeConfig {
            k_max,
            ..EpisodeConfig::default()
        };
        let stab = stab.as_ref().map(|s| &s.inner);
        let log = run_episode(&s0, &model.spec, &model.params, &cfg, stab);
        *out = Box::into_raw(Box::new(DsEpisode { log }));
        DsStatus::Ok
    })
}

/// `Ok` for a completed episode, otherwise the code of the error that ended it.
#[no_mangle]
pub unsafe extern "C" fn ds_episode_status(ep: *const DsEpisode) -> DsStatus {
    guard(|| {
        let ep = deref!(ep, "episode");
        match &ep.log.termination {
            Termination::Completed => DsStatus::Ok,
            Termination::Failed { error, .. } => fail(DsStatus::from(error), ep.log.termination.describe()),
        }
    })
}

/// Number of logged impulses; zero for a null handle.
#[no_mangle]
pub unsafe extern "C" fn ds_episode_len(ep: *const DsEpisode) -> usize {
    ep.as_ref().map_or(0, |e| e.log.records.len())
}

/// Time of the last logged impulse.
#[no_mangle]
pub unsafe extern "C" fn ds_episode_elapsed(ep: *const DsEpisode) -> f64 {
    ep.as_ref().map_or(0.0, |e| e.log.elapsed())
}

#[no_mangle]
pub unsafe extern "C" fn ds_episode_record(
    ep: *const DsEpisode,
    index: usize,
    out: *mut DsStepRecord,
) -> DsStatus {
    guard(|| {
        let ep = deref!(ep, "episode");
        let out = out!(out, "out");
        let Some(r) = ep.log.records.get(index) else {
            return fail(
                DsStatus::OutOfRange,
                format!("record {index} of {}", ep.log.records.len()),
            );
        };
        let u = r.u.unwrap_or_default();
        *out = DsStepRecord {
            k: r.k,
            t: r.t,
            theta: r.theta,
            omega: r.omega,
            rho_x: r.rho.x,
            rho_y: r.rho.y,
            drho_x: r.drho.x,
            drho_y: r.drho.y,
            delta: r.delta,
            impulse: r.impulse,
            offset: r.offset,
            u_impulse: u.x,
            u_offset: u.y,
        };
        DsStatus::Ok
    })
}

/// State after the last completed flight.
#[no_mangle]
pub unsafe extern "C" fn ds_episode_final_state(ep: *const DsEpisode, out: *mut DsState) -> DsStatus {
    guard(|| {
        let ep = deref!(ep, "episode");
        *out!(out, "out") = DsState::from(&ep.log.final_state);
        DsStatus::Ok
    })
}

#[no_mangle]
pub unsafe extern "C" fn ds_episode_free(ep: *mut DsEpisode) {
    if !ep.is_null() {
        drop(Box::from_raw(ep));
    }
}
