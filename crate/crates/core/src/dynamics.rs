//! Hybrid plant: instantaneous impulsive jumps followed by ballistic flight.
//!
//! Flight is evaluated in closed form; there is no integrator anywhere in the
//! crate, so flight times produced by the controller are exact.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FullState, ImpulseCmd, ImpulseIndex, JuggleSpec, StickParams};

/// Below this magnitude the post-impulse angular rate is treated as zero.
pub const DEGENERATE_RATE: f64 = 1e-12;

/// Tolerance on landing at the scheduled orientation after a flight.
pub const SCHEDULE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlightSample {
    pub t: f64,
    pub state: FullState,
}

fn normal(theta: f64) -> Vector2<f64> {
    Vector2::new(-theta.sin(), theta.cos())
}

/// Velocity jump caused by an impulse `impulse` applied normal to the stick at
/// signed distance `offset` from the center of mass.
pub fn impulsive_update(
    s: &FullState,
    impulse: f64,
    offset: f64,
    p: &StickParams,
) -> Result<FullState> {
    s.ensure_finite()?;
    if !impulse.is_finite() || !offset.is_finite() {
        return Err(Error::NonFinite("impulse"));
    }
    Ok(FullState {
        h: s.h,
        v: s.v + normal(s.theta) * (impulse / p.m),
        theta: s.theta,
        omega: s.omega + impulse * offset / p.j,
    })
}

/// Free flight under gravity for `delta` seconds.
pub fn flight(s_plus: &FullState, delta: f64, p: &StickParams) -> Result<FullState> {
    if delta.is_nan() || delta < 0.0 {
        return Err(Error::NegativeDuration(delta));
    }
    if !delta.is_finite() {
        return Err(Error::NonFinite("delta"));
    }
    let s = s_plus;
    Ok(FullState {
        h: s.h + s.v * delta + Vector2::new(0.0, -0.5 * p.g * delta * delta),
        v: s.v + Vector2::new(0.0, -p.g * delta),
        theta: s.theta + s.omega * delta,
        omega: s.omega,
    })
}

/// One impulse followed by a flight of `cmd.delta`.
pub fn hybrid_step(s: &FullState, cmd: &ImpulseCmd, p: &StickParams) -> Result<FullState> {
    if !(cmd.delta > 0.0) {
        return Err(Error::Infeasible { delta: cmd.delta });
    }
    let s_plus = impulsive_update(s, cmd.impulse, cmd.offset, p)?;
    flight(&s_plus, cmd.delta, p)
}

/// Time until the stick reaches the next scheduled orientation after impulse `k`.
pub fn time_of_flight(
    omega_k: f64,
    impulse: f64,
    offset: f64,
    k: ImpulseIndex,
    spec: &JuggleSpec,
    p: &StickParams,
) -> Result<f64> {
    let omega_next = omega_k + impulse * offset / p.j;
    if !omega_next.is_finite() {
        return Err(Error::NonFinite("angular rate"));
    }
    if omega_next.abs() < DEGENERATE_RATE {
        return Err(Error::Degenerate("post-impulse angular rate is zero"));
    }
    let delta = -k.sign() * spec.delta_theta_star() / omega_next;
    if delta <= 0.0 {
        return Err(Error::Infeasible { delta });
    }
    Ok(delta)
}

/// Apply `(impulse, offset)` at impulse `k` and fly until the next scheduled
/// orientation. Returns the pre-impulse state at `k + 1` and the flight time.
///
/// The landing orientation is snapped to the schedule; it differs from
/// `theta + omega * delta` only by rounding.
pub fn advance(
    s: &FullState,
    k: ImpulseIndex,
    impulse: f64,
    offset: f64,
    spec: &JuggleSpec,
    p: &StickParams,
) -> Result<(FullState, f64)> {
    let delta = time_of_flight(s.omega, impulse, offset, k, spec, p)?;
    let mut next = hybrid_step(
        s,
        &ImpulseCmd {
            impulse,
            offset,
            delta,
        },
        p,
    )?;
    let scheduled = spec.theta_at(k.next());
    debug_assert!(
        (next.theta - scheduled).abs() < SCHEDULE_TOL,
        "landed at {} instead of {}",
        next.theta,
        scheduled
    );
    next.theta = scheduled;
    Ok((next, delta))
}

/// Dense samples of a flight at `t = 0, dt, 2 dt, ...` ending exactly at `delta`.
pub fn sample_flight(
    s_plus: &FullState,
    delta: f64,
    dt: f64,
    p: &StickParams,
) -> Result<Vec<FlightSample>> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::BadSampleInterval(dt));
    }
    if delta.is_nan() || delta < 0.0 {
        return Err(Error::NegativeDuration(delta));
    }
    let end_guard = 1e-9 * dt;
    let mut out = Vec::with_capacity((delta / dt) as usize + 2);
    let mut i = 0u64;
    loop {
        let t = i as f64 * dt;
        if t >= delta - end_guard {
            break;
        }
        out.push(FlightSample {
            t,
            state: flight(s_plus, t, p)?,
        });
        i += 1;
    }
    out.push(FlightSample {
        t: delta,
        state: flight(s_plus, delta, p)?,
    });
    Ok(out)
}

/// Total mechanical energy (gravity along -y).
pub fn mechanical_energy(s: &FullState, p: &StickParams) -> f64 {
    p.m * p.g * s.h.y + 0.5 * p.m * s.v.norm_squared() + 0.5 * p.j * s.omega * s.omega
}
