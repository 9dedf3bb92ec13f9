//! Zero dynamics of the constrained system: the recursion on `(theta_k, omega_k)`
//! that remains once both position and velocity constraints hold, and the
//! family of 2-periodic orbits it admits.

use serde::{Deserialize, Serialize};

use crate::dvhc::steady_inputs;
use crate::error::{Error, Result};
use crate::model::{ImpulseIndex, JuggleSpec, StickParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DzdState {
    pub theta: f64,
    pub omega: f64,
    pub k: ImpulseIndex,
}

/// A 2-periodic juggling orbit, parameterized by the angular rate `omega_star`
/// at the odd orientation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitSpec {
    pub spec: JuggleSpec,
    pub omega_star: f64,
    pub omega_even: f64,
    pub delta_odd: f64,
    pub delta_even: f64,
    pub impulse_mag: f64,
    pub r_star: f64,
}

impl OrbitSpec {
    pub fn period(&self) -> f64 {
        self.delta_odd + self.delta_even
    }

    /// Signed impulse on the orbit at impulse `k`.
    pub fn impulse_at(&self, k: ImpulseIndex) -> f64 {
        -k.sign() * self.impulse_mag
    }
}

fn tan_factor(k: ImpulseIndex, spec: &JuggleSpec) -> f64 {
    1.0 - spec.theta_at(k.next()).tan() / spec.theta_at(k).tan()
}

/// One step of the zero dynamics.
pub fn dzd_step(s: &DzdState, spec: &JuggleSpec, p: &StickParams) -> Result<DzdState> {
    if !s.omega.is_finite() || s.omega == 0.0 {
        return Err(Error::Degenerate("zero angular rate"));
    }
    if s.omega * s.k.sign() < 0.0 {
        return Err(Error::WrongRotationSign {
            omega: s.omega,
            k: s.k.get(),
        });
    }
    let f = tan_factor(s.k, spec);
    if !f.is_finite() || f.abs() < 1e-12 {
        return Err(Error::Degenerate("1 - tan(theta_next)/tan(theta_k) vanishes"));
    }
    let dth = spec.delta_theta_star();
    let next = s.k.next();
    Ok(DzdState {
        theta: spec.theta_at(next),
        omega: -p.g * dth * dth / (2.0 * s.omega * spec.alpha * f),
        k: next,
    })
}

/// Residual of the zero-dynamics relation between two consecutive impulses,
/// `[orientation advance, rate relation]`.
pub fn dzd_residual(
    now: &DzdState,
    next: &DzdState,
    spec: &JuggleSpec,
    p: &StickParams,
) -> [f64; 2] {
    let dth = spec.delta_theta_star();
    let f = 1.0 - next.theta.tan() / now.theta.tan();
    [
        next.theta - now.theta + now.k.sign() * dth,
        p.g * dth * dth / (2.0 * now.omega * next.omega) + spec.alpha * f,
    ]
}

/// Two-step multiplier on `omega` starting from an odd impulse:
/// `omega_{k+2} = growth_factor * omega_k`.
pub fn growth_factor(spec: &JuggleSpec) -> f64 {
    -spec.theta_even.tan() / spec.theta_odd.tan()
}

pub fn design_orbit(spec: &JuggleSpec, omega_star: f64, p: &StickParams) -> Result<OrbitSpec> {
    if !spec.is_symmetric() {
        return Err(Error::AsymmetricSpec);
    }
    if !(omega_star < 0.0) || !omega_star.is_finite() {
        return Err(Error::WrongSign(omega_star));
    }
    let dth = spec.delta_theta_star();
    let alpha = spec.alpha;
    let g = p.g;
    let cos_odd = spec.theta_odd.cos();
    let omega_even = -g * dth * dth / (4.0 * omega_star * alpha);
    let delta_odd = -4.0 * omega_star * alpha / (g * dth);
    let delta_even = -dth / omega_star;
    let impulse_odd =
        -2.0 * p.m * alpha / (dth * cos_odd) * (omega_star + g * dth * dth / (4.0 * omega_star * alpha));
    let r_star = p.j * dth * cos_odd / (2.0 * p.m * alpha);
    Ok(OrbitSpec {
        spec: *spec,
        omega_star,
        omega_even,
        delta_odd,
        delta_even,
        impulse_mag: impulse_odd.abs(),
        r_star,
    })
}

/// The orbit that is also symmetric in angular rate (`omega_even = -omega_star`).
pub fn symmetric_omega_star(spec: &JuggleSpec, p: &StickParams) -> Result<f64> {
    if !spec.is_symmetric() {
        return Err(Error::AsymmetricSpec);
    }
    Ok(-0.5 * spec.delta_theta_star() * (p.g / spec.alpha).sqrt())
}

/// Steady inputs at the odd impulse of `orbit`, via the general closed form.
pub fn orbit_inputs(orbit: &OrbitSpec, p: &StickParams) -> Result<(f64, f64)> {
    let cmd = steady_inputs(orbit.omega_star, ImpulseIndex::FIRST, &orbit.spec, p)?;
    Ok((cmd.impulse, cmd.offset))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn params() -> StickParams {
        StickParams::uniform_rod(0.1, 0.5)
    }

    fn spec() -> JuggleSpec {
        JuggleSpec::symmetric(PI / 6.0, 0.6131, 3.0, 0.5)
    }

    fn odd_state(omega: f64, spec: &JuggleSpec) -> DzdState {
        DzdState {
            theta: spec.theta_odd,
            omega,
            k: ImpulseIndex::FIRST,
        }
    }

    #[test]
    fn step_from_periodic_orbit() {
        let p = params();
        let s = spec();
        let next = dzd_step(&odd_state(-3.1596, &s), &s, &p).unwrap();
        assert!((next.omega - 5.5532).abs() < 1e-3);
        assert_eq!(next.theta, s.theta_even);
        let back = dzd_step(&next, &s, &p).unwrap();
        assert!((back.omega + 3.1596).abs() < 1e-12);
        assert_eq!(back.k.get(), 3);
    }

    #[test]
    fn asymmetric_spec_grows_by_tan_ratio() {
        let p = params();
        let s = JuggleSpec {
            theta_even: 2.0 * PI / 3.0,
            ..spec()
        };
        assert!((growth_factor(&s) - 3.0).abs() < 1e-12);
        let w0 = -2.0;
        let w1 = dzd_step(&odd_state(w0, &s), &s, &p).unwrap();
        let w2 = dzd_step(&w1, &s, &p).unwrap();
        assert!((w2.omega / w0 - 3.0).abs() < 1e-12);
        assert!(design_orbit(&s, -3.0, &p).is_err());
    }

    #[test]
    fn growth_factor_is_one_when_symmetric() {
        assert!((growth_factor(&spec()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn wrong_sign_is_rejected() {
        let p = params();
        let s = spec();
        assert!(matches!(
            dzd_step(&odd_state(2.0, &s), &s, &p),
            Err(Error::WrongRotationSign { .. })
        ));
        assert_eq!(design_orbit(&s, 1.0, &p), Err(Error::WrongSign(1.0)));
    }

    #[test]
    fn design_reference_orbits() {
        let p = params();
        let s = spec();
        let o = design_orbit(&s, -3.1596, &p).unwrap();
        assert!((o.omega_even - 5.5532).abs() < 1e-3);
        assert!((o.delta_odd - 0.3771).abs() < 1e-4);
        assert!((o.delta_even - 0.6629).abs() < 1e-4);
        assert!((o.impulse_mag - 0.5890).abs() < 1e-4);
        assert!((o.r_star - 0.0308).abs() < 1e-4);

        let sym = design_orbit(&s, -4.1888, &p).unwrap();
        assert!((sym.delta_odd - 0.5).abs() < 1e-4);
        assert!((sym.delta_even - 0.5).abs() < 1e-4);
        assert!((sym.impulse_mag - 0.5664).abs() < 1e-4);
        assert_eq!(sym.r_star, o.r_star);
    }

    #[test]
    fn designed_orbit_satisfies_zero_dynamics_and_closed_form() {
        let p = params();
        let s = spec();
        for w in [-1.5, -3.1596, -4.1888, -9.0] {
            let o = design_orbit(&s, w, &p).unwrap();
            let odd = odd_state(w, &s);
            let even = DzdState {
                theta: s.theta_even,
                omega: o.omega_even,
                k: ImpulseIndex::FIRST.next(),
            };
            let back = DzdState {
                k: ImpulseIndex::new(3).unwrap(),
                ..odd
            };
            for r in dzd_residual(&odd, &even, &s, &p)
                .into_iter()
                .chain(dzd_residual(&even, &back, &s, &p))
            {
                assert!(r.abs() < 1e-12, "{r}");
            }
            let (i, r) = orbit_inputs(&o, &p).unwrap();
            assert!((i - o.impulse_mag).abs() < 1e-12);
            assert!((r - o.r_star).abs() < 1e-15);
        }
    }

    #[test]
    fn symmetric_special_case() {
        let p = params();
        let s = spec();
        let w = symmetric_omega_star(&s, &p).unwrap();
        assert!((w + 4.1888).abs() < 1e-4);
        let o = design_orbit(&s, w, &p).unwrap();
        assert!((o.omega_even + w).abs() < 1e-12);
        assert!((o.delta_odd - o.delta_even).abs() < 1e-12);

        let unit = JuggleSpec { alpha: p.g, ..s };
        let w = symmetric_omega_star(&unit, &p).unwrap();
        assert!((w + unit.delta_theta_star() / 2.0).abs() < 1e-15);
    }
}
