//! Discrete virtual holonomic constraint `h(k) = Phi(theta_k)` and the
//! impulsive controller that drives its residual to zero geometrically.
//!
//! `Phi(theta) = [alpha tan(theta), beta]`. The matching velocity constraint
//! `Psi(theta_k, omega_k)` follows from requiring the constraint at two
//! consecutive impulses with the flight time implied by `omega_k`.

use std::f64::consts::FRAC_PI_2;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::dynamics::DEGENERATE_RATE;
use crate::error::{Error, Result};
use crate::model::{FullState, ImpulseCmd, ImpulseIndex, JuggleSpec, StickParams};

/// Distance from `pi/2 + n pi` inside which `tan` is treated as singular.
pub const TAN_SINGULAR_TOL: f64 = 1e-9;
/// Below this `|omega_k|` the velocity constraint is undefined.
pub const MIN_RATE: f64 = 1e-9;
/// Maximum orientation mismatch accepted against the impulse schedule.
pub const SCHEDULE_MATCH_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RodPolicy {
    /// Reject commands whose offset falls off the stick.
    #[default]
    Strict,
    /// Log and apply them anyway.
    Warn,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub rho: Vector2<f64>,
    pub drho: Vector2<f64>,
}

/// `Phi(theta_{k+1}) - Phi(theta_k)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtaK {
    pub eta: Vector2<f64>,
}

pub fn phi(theta: f64, spec: &JuggleSpec) -> Result<Vector2<f64>> {
    let from_pole = (theta - FRAC_PI_2).rem_euclid(std::f64::consts::PI);
    if from_pole < TAN_SINGULAR_TOL || std::f64::consts::PI - from_pole < TAN_SINGULAR_TOL {
        return Err(Error::Singular(theta));
    }
    Ok(Vector2::new(spec.alpha * theta.tan(), spec.beta))
}

pub fn eta(k: ImpulseIndex, spec: &JuggleSpec) -> Result<EtaK> {
    let now = phi(spec.theta_at(k), spec)?;
    let next = phi(spec.theta_at(k.next()), spec)?;
    Ok(EtaK { eta: next - now })
}

fn check_rate(omega_k: f64, k: ImpulseIndex) -> Result<()> {
    if !omega_k.is_finite() {
        return Err(Error::NonFinite("omega"));
    }
    if omega_k.abs() < MIN_RATE {
        return Err(Error::Degenerate("angular rate too small for velocity constraint"));
    }
    // odd impulses happen while rotating clockwise, even ones counter-clockwise
    if omega_k * k.sign() < 0.0 {
        return Err(Error::WrongRotationSign {
            omega: omega_k,
            k: k.get(),
        });
    }
    Ok(())
}

/// Velocity the center of mass must have at impulse `k` for the constraint to
/// hold at `k - 1` and `k` given the angular rate `omega_k`.
pub fn psi(
    theta_k: f64,
    omega_k: f64,
    k: ImpulseIndex,
    spec: &JuggleSpec,
    p: &StickParams,
) -> Result<Vector2<f64>> {
    check_rate(omega_k, k)?;
    let dth = spec.delta_theta_star();
    let sgn = k.sign();
    let theta_next = theta_k - sgn * dth;
    let now = phi(theta_k, spec)?;
    let next = phi(theta_next, spec)?;
    Ok(Vector2::new(
        sgn * omega_k / dth * (now.x - next.x),
        -sgn * p.g * dth / (2.0 * omega_k),
    ))
}

pub fn check_schedule(theta: f64, k: ImpulseIndex, spec: &JuggleSpec) -> Result<()> {
    let expected = spec.theta_at(k);
    if !((theta - expected).abs() <= SCHEDULE_MATCH_TOL) {
        return Err(Error::OffSchedule {
            theta,
            expected,
            k: k.get(),
        });
    }
    Ok(())
}

pub fn residuals(
    s: &FullState,
    k: ImpulseIndex,
    spec: &JuggleSpec,
    p: &StickParams,
) -> Result<Residuals> {
    s.ensure_finite()?;
    check_schedule(s.theta, k, spec)?;
    let theta_k = spec.theta_at(k);
    Ok(Residuals {
        rho: s.h - phi(theta_k, spec)?,
        drho: s.v - psi(theta_k, s.omega, k, spec, p)?,
    })
}

/// `a delta^2 + b delta + c = 0`, the flight time that enforces the constraint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TofQuadratic {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl TofQuadratic {
    pub fn eval(&self, x: f64) -> f64 {
        (self.a * x + self.b) * x + self.c
    }

    /// Residual scaled by the magnitude of the individual terms.
    pub fn relative_residual(&self, x: f64) -> f64 {
        let scale = (self.a * x * x).abs() + (self.b * x).abs() + self.c.abs();
        if scale == 0.0 {
            0.0
        } else {
            self.eval(x).abs() / scale
        }
    }

    /// Real roots, computed without cancellation. `None` for complex roots.
    pub fn real_roots(&self) -> Option<(f64, f64)> {
        let disc = self.b * self.b - 4.0 * self.a * self.c;
        if disc < 0.0 || !disc.is_finite() {
            return None;
        }
        let sq = disc.sqrt();
        let q = -0.5 * (self.b + self.b.signum() * sq);
        if q == 0.0 {
            // b == 0 and c == 0
            return Some((0.0, 0.0));
        }
        let r1 = q / self.a;
        let r2 = self.c / q;
        Some((r1.min(r2), r1.max(r2)))
    }

    /// The positive root closest to `nominal`, ties going to the smaller root.
    pub fn select_positive_root(&self, nominal: f64) -> Result<f64> {
        let no_root = Error::NoPositiveRoot {
            a: self.a,
            b: self.b,
            c: self.c,
        };
        let (lo, hi) = self.real_roots().ok_or_else(|| no_root.clone())?;
        match (lo > 0.0, hi > 0.0) {
            (true, true) => {
                if (hi - nominal).abs() < (lo - nominal).abs() {
                    Ok(hi)
                } else {
                    Ok(lo)
                }
            }
            (false, true) => Ok(hi),
            _ => Err(no_root),
        }
    }
}

pub fn tof_quadratic(
    s: &FullState,
    k: ImpulseIndex,
    spec: &JuggleSpec,
    p: &StickParams,
) -> Result<TofQuadratic> {
    let res = residuals(s, k, spec, p)?;
    let theta_k = spec.theta_at(k);
    let cot = 1.0 / theta_k.tan();
    let eta = eta(k, spec)?.eta;
    // Drho + Psi is the measured velocity
    let v = s.v;
    Ok(TofQuadratic {
        a: 0.5 * p.g,
        b: -(v.x * cot + v.y),
        c: eta.x * cot
            + eta.y
            + (spec.lambda_x - 1.0) * res.rho.x * cot
            + (spec.lambda_y - 1.0) * res.rho.y,
    })
}

fn tan_ratio_factor(k: ImpulseIndex, spec: &JuggleSpec) -> Result<f64> {
    let now = spec.theta_at(k).tan();
    let next = spec.theta_at(k.next()).tan();
    let f = 1.0 - next / now;
    if !f.is_finite() || f.abs() < 1e-12 {
        return Err(Error::Degenerate("1 - tan(theta_next)/tan(theta_k) vanishes"));
    }
    Ok(f)
}

/// Steady-state flight time on the constraint for angular rate `omega_k`.
pub fn steady_delta(omega_k: f64, k: ImpulseIndex, spec: &JuggleSpec, p: &StickParams) -> Result<f64> {
    let f = tan_ratio_factor(k, spec)?;
    Ok(k.sign() * 2.0 * omega_k * spec.alpha / (p.g * spec.delta_theta_star()) * f)
}

/// Closed-form inputs for a state that already satisfies both constraints.
pub fn steady_inputs(
    omega_k: f64,
    k: ImpulseIndex,
    spec: &JuggleSpec,
    p: &StickParams,
) -> Result<ImpulseCmd> {
    check_rate(omega_k, k)?;
    let f = tan_ratio_factor(k, spec)?;
    let dth = spec.delta_theta_star();
    let cos_k = spec.theta_at(k).cos();
    let sgn = k.sign();
    let delta = steady_delta(omega_k, k, spec, p)?;
    if !(delta > 0.0) {
        return Err(Error::Infeasible { delta });
    }
    let impulse =
        sgn * p.m / cos_k * (omega_k * spec.alpha / dth * f + p.g * dth / (2.0 * omega_k));
    let offset = -sgn * p.j * dth * cos_k / (p.m * spec.alpha * f);
    Ok(ImpulseCmd {
        impulse,
        offset,
        delta,
    })
}

fn enforce_rod(offset: f64, p: &StickParams, policy: RodPolicy) -> Result<()> {
    let half = p.half_length();
    if offset.abs() < half {
        return Ok(());
    }
    match policy {
        RodPolicy::Strict => Err(Error::RodExceeded {
            r: offset,
            half_length: half,
        }),
        RodPolicy::Warn => {
            log::warn!("impulse offset {offset} outside the stick (half-length {half})");
            Ok(())
        }
    }
}

/// Inputs at impulse `k` such that `rho_{k+1} = lambda rho_k`.
pub fn dvhc_control(
    s: &FullState,
    k: ImpulseIndex,
    spec: &JuggleSpec,
    p: &StickParams,
    policy: RodPolicy,
) -> Result<ImpulseCmd> {
    let theta_k = spec.theta_at(k);
    let sin_k = theta_k.sin();
    if sin_k.abs() < 1e-12 {
        return Err(Error::Degenerate("sin(theta_k) vanishes"));
    }
    let quad = tof_quadratic(s, k, spec, p)?;
    let nominal = steady_delta(s.omega, k, spec, p)?;
    let delta = quad.select_positive_root(nominal)?;

    let res = residuals(s, k, spec, p)?;
    let eta_x = eta(k, spec)?.eta.x;
    let impulse =
        -p.m * ((spec.lambda_x - 1.0) * res.rho.x + eta_x - s.v.x * delta) / (delta * sin_k);
    if !impulse.is_finite() || impulse.abs() < DEGENERATE_RATE {
        return Err(Error::Degenerate("zero impulse cannot set the flight time"));
    }
    let offset =
        -k.sign() * p.j * spec.delta_theta_star() / (impulse * delta) - p.j * s.omega / impulse;
    enforce_rod(offset, p, policy)?;
    Ok(ImpulseCmd {
        impulse,
        offset,
        delta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::advance;
    use std::f64::consts::PI;

    fn params() -> StickParams {
        StickParams::uniform_rod(0.1, 0.5)
    }

    fn spec() -> JuggleSpec {
        JuggleSpec::symmetric(PI / 6.0, 0.6131, 3.0, 0.5)
    }

    const ODD: ImpulseIndex = ImpulseIndex::FIRST;

    fn even() -> ImpulseIndex {
        ODD.next()
    }

    #[test]
    fn phi_values() {
        let s = spec();
        let at = phi(PI / 4.0, &s).unwrap();
        assert!((at.x - 0.6131).abs() < 1e-12 && at.y == 3.0);
        let odd = phi(PI / 6.0, &s).unwrap();
        assert!((odd.x - 0.3540).abs() < 5e-5);
        let even = phi(5.0 * PI / 6.0, &s).unwrap();
        assert!((even.x + odd.x).abs() < 1e-12);
        assert!(matches!(phi(FRAC_PI_2, &s), Err(Error::Singular(_))));
        assert!(matches!(phi(-FRAC_PI_2, &s), Err(Error::Singular(_))));
    }

    #[test]
    fn eta_has_no_vertical_component() {
        let e = eta(ODD, &spec()).unwrap();
        assert_eq!(e.eta.y, 0.0);
        assert!((e.eta.x + 2.0 * 0.6131 * (PI / 6.0).tan()).abs() < 1e-12);
    }

    #[test]
    fn psi_on_symmetric_orbit() {
        let p = params();
        let w = -PI / 3.0 * (p.g / 0.6131).sqrt();
        let odd = psi(PI / 6.0, w, ODD, &spec(), &p).unwrap();
        assert!((odd.x - 1.4160).abs() < 1e-4, "{odd}");
        assert!((odd.y + 2.4525).abs() < 1e-4, "{odd}");
        let ev = psi(5.0 * PI / 6.0, -w, even(), &spec(), &p).unwrap();
        // mirror image of the odd instant: x flips, the stick is still falling
        assert!((ev.x + odd.x).abs() < 1e-12);
        assert!((ev.y - odd.y).abs() < 1e-12);
    }

    #[test]
    fn psi_rejects_bad_rates() {
        let p = params();
        assert!(matches!(
            psi(PI / 6.0, 3.0, ODD, &spec(), &p),
            Err(Error::WrongRotationSign { .. })
        ));
        assert!(matches!(
            psi(PI / 6.0, 0.0, ODD, &spec(), &p),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn psi_vertical_vanishes_for_fast_rotation() {
        let p = params();
        let slow = psi(PI / 6.0, -10.0, ODD, &spec(), &p).unwrap();
        let fast = psi(PI / 6.0, -1e6, ODD, &spec(), &p).unwrap();
        assert!(fast.y.abs() < 1e-4);
        assert!((fast.x / slow.x - 1e5).abs() < 1e-6);
    }

    #[test]
    fn residuals_of_reference_initial_condition() {
        let p = params();
        let s = FullState::new(0.7, 2.5, PI / 6.0, 0.9, -2.0, -5.7);
        let r = residuals(&s, ODD, &spec(), &p).unwrap();
        assert!((r.rho.x - (0.7 - 0.6131 * (PI / 6.0).tan())).abs() < 1e-15);
        assert!((r.rho.x - 0.3460).abs() < 1e-4);
        assert_eq!(r.rho.y, -0.5);
        let expected = Vector2::new(0.9, -2.0) - psi(PI / 6.0, -5.7, ODD, &spec(), &p).unwrap();
        assert_eq!(r.drho, expected);
        let off = FullState { theta: 0.5236, ..s };
        assert!(matches!(
            residuals(&off, ODD, &spec(), &p),
            Err(Error::OffSchedule { .. })
        ));
    }

    #[test]
    fn stable_root_formula() {
        // (x - 1e-8)(x - 1e8) has catastrophic cancellation in the naive formula
        let q = TofQuadratic {
            a: 1.0,
            b: -(1e8 + 1e-8),
            c: 1.0,
        };
        let (lo, hi) = q.real_roots().unwrap();
        assert!((lo - 1e-8).abs() < 1e-20);
        assert!((hi - 1e8).abs() < 1e-6);
        assert_eq!(q.select_positive_root(1.0).unwrap(), lo);
        assert_eq!(q.select_positive_root(9e7).unwrap(), hi);

        let complex = TofQuadratic { a: 1.0, b: 0.0, c: 1.0 };
        assert!(matches!(
            complex.select_positive_root(1.0),
            Err(Error::NoPositiveRoot { .. })
        ));
        let negative = TofQuadratic { a: 1.0, b: 3.0, c: 2.0 };
        assert!(negative.select_positive_root(1.0).is_err());
        let tie = TofQuadratic { a: 1.0, b: -4.0, c: 3.0 };
        assert_eq!(tie.select_positive_root(2.0).unwrap(), 1.0);
    }

    #[test]
    fn steady_inputs_match_reference_orbits() {
        let p = params();
        let sym = steady_inputs(-4.1888, ODD, &spec(), &p).unwrap();
        assert!((sym.delta - 0.5).abs() < 1e-4);
        assert!((sym.impulse - 0.5664).abs() < 1e-4);
        assert!((sym.offset - 0.0308).abs() < 1e-4);

        let per = steady_inputs(-3.1596, ODD, &spec(), &p).unwrap();
        assert!((per.delta - 0.3771).abs() < 1e-4);
        assert!((per.impulse - 0.5890).abs() < 1e-4);
        assert!((per.offset - 0.0308).abs() < 1e-4);

        let per_even = steady_inputs(5.5532, even(), &spec(), &p).unwrap();
        assert!((per_even.delta - 0.6629).abs() < 1e-4);
        assert!((per_even.impulse + 0.5890).abs() < 1e-4);
        assert!((per_even.offset - per.offset).abs() < 1e-12);
    }

    fn on_constraint(omega: f64, k: ImpulseIndex) -> FullState {
        let s = spec();
        let p = params();
        let th = s.theta_at(k);
        let h = phi(th, &s).unwrap();
        let v = psi(th, omega, k, &s, &p).unwrap();
        FullState {
            h,
            v,
            theta: th,
            omega,
        }
    }

    #[test]
    fn controller_on_constraint_matches_closed_form() {
        let p = params();
        for (omega, k) in [(-3.1596, ODD), (5.5532, even()), (-4.1888, ODD)] {
            let s = on_constraint(omega, k);
            let cmd = dvhc_control(&s, k, &spec(), &p, RodPolicy::Strict).unwrap();
            let closed = steady_inputs(omega, k, &spec(), &p).unwrap();
            assert!((cmd.delta - closed.delta).abs() < 1e-12);
            assert!((cmd.impulse - closed.impulse).abs() < 1e-12);
            assert!((cmd.offset - closed.offset).abs() < 1e-12);
        }
    }

    #[test]
    fn controller_halves_residual_from_reference_start() {
        let p = params();
        let sp = spec();
        let s = FullState::new(0.7, 2.5, PI / 6.0, 0.9, -2.0, -5.7);
        let r0 = residuals(&s, ODD, &sp, &p).unwrap();
        let cmd = dvhc_control(&s, ODD, &sp, &p, RodPolicy::Strict).unwrap();
        let (next, delta) = advance(&s, ODD, cmd.impulse, cmd.offset, &sp, &p).unwrap();
        assert!((delta - cmd.delta).abs() < 1e-12);
        let r1 = residuals(&next, even(), &sp, &p).unwrap();
        assert!((r1.rho - r0.rho * 0.5).amax() < 1e-9);
        assert!((r1.drho - r0.rho * (-0.5 / delta)).amax() < 1e-9);
    }

    #[test]
    fn rod_policy() {
        let p = StickParams::uniform_rod(0.1, 0.05).with_inertia(0.1 * 0.25 / 12.0);
        let s = on_constraint(-4.1888, ODD);
        assert!(matches!(
            dvhc_control(&s, ODD, &spec(), &p, RodPolicy::Strict),
            Err(Error::RodExceeded { .. })
        ));
        assert!(dvhc_control(&s, ODD, &spec(), &p, RodPolicy::Warn).is_ok());
    }
}
