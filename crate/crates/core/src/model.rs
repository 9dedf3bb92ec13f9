//! Domain types shared across the toolkit.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Standard gravity used when none is supplied.
pub const DEFAULT_GRAVITY: f64 = 9.81;

/// Tolerance on `theta_even = pi - theta_odd` for the symmetric (periodic) case.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Physical constants of the stick.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StickParams {
    pub m: f64,
    pub ell: f64,
    pub j: f64,
    pub g: f64,
}

impl StickParams {
    /// Uniform thin rod: `J = m ell^2 / 12`, standard gravity.
    pub fn uniform_rod(m: f64, ell: f64) -> Self {
        Self {
            m,
            ell,
            j: m * ell * ell / 12.0,
            g: DEFAULT_GRAVITY,
        }
    }

    pub fn with_inertia(mut self, j: f64) -> Self {
        self.j = j;
        self
    }

    pub fn with_gravity(mut self, g: f64) -> Self {
        self.g = g;
        self
    }

    pub fn half_length(&self) -> f64 {
        0.5 * self.ell
    }
}

/// Constraint and scheduling parameters for juggling between two orientations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JuggleSpec {
    pub theta_odd: f64,
    pub theta_even: f64,
    pub alpha: f64,
    pub beta: f64,
    pub lambda_x: f64,
    pub lambda_y: f64,
}

impl JuggleSpec {
    /// Orientations symmetric about the vertical: `theta_even = pi - theta_odd`.
    pub fn symmetric(theta_odd: f64, alpha: f64, beta: f64, lambda: f64) -> Self {
        Self {
            theta_odd,
            theta_even: PI - theta_odd,
            alpha,
            beta,
            lambda_x: lambda,
            lambda_y: lambda,
        }
    }

    /// Angle swept between consecutive impulses (always `theta_even - theta_odd`).
    pub fn delta_theta_star(&self) -> f64 {
        self.theta_even - self.theta_odd
    }

    pub fn is_symmetric(&self) -> bool {
        (self.theta_even - (PI - self.theta_odd)).abs() <= SYMMETRY_TOL
    }

    pub fn lambda(&self) -> Vector2<f64> {
        Vector2::new(self.lambda_x, self.lambda_y)
    }

    /// Scheduled orientation at impulse `k`.
    pub fn theta_at(&self, k: ImpulseIndex) -> f64 {
        if k.is_odd() {
            self.theta_odd
        } else {
            self.theta_even
        }
    }
}

/// One impulsive actuation and the flight time it produces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImpulseCmd {
    pub impulse: f64,
    pub offset: f64,
    pub delta: f64,
}

/// Position, velocity, orientation and angular rate of the stick.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FullState {
    pub h: Vector2<f64>,
    pub v: Vector2<f64>,
    pub theta: f64,
    pub omega: f64,
}

impl FullState {
    pub fn new(hx: f64, hy: f64, theta: f64, vx: f64, vy: f64, omega: f64) -> Self {
        Self {
            h: Vector2::new(hx, hy),
            v: Vector2::new(vx, vy),
            theta,
            omega,
        }
    }

    /// `[hx, hy, theta, vx, vy, omega]`, the ordering of `(q, qdot)`.
    pub fn to_array(&self) -> [f64; 6] {
        [self.h.x, self.h.y, self.theta, self.v.x, self.v.y, self.omega]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|x| x.is_finite())
    }

    pub fn ensure_finite(&self) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite("state"))
        }
    }

    pub fn max_abs_diff(&self, other: &FullState) -> f64 {
        self.to_array()
            .iter()
            .zip(other.to_array())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Impulse counter. `k = 1` is the first impulse, applied at `theta_odd`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ImpulseIndex(u32);

impl ImpulseIndex {
    pub const FIRST: ImpulseIndex = ImpulseIndex(1);

    pub fn new(k: u32) -> Result<Self> {
        if k == 0 {
            return Err(Error::Invalid("impulse index starts at 1".into()));
        }
        Ok(Self(k))
    }

    pub fn get(self) -> u32 {
        self.0
    }

    pub fn is_odd(self) -> bool {
        self.0 % 2 == 1
    }

    /// `(-1)^k`.
    pub fn sign(self) -> f64 {
        if self.is_odd() {
            -1.0
        } else {
            1.0
        }
    }

    pub fn next(self) -> Self {
        Self(self.0 + 1)
    }
}

impl std::fmt::Display for ImpulseIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldCheck {
    pub field: &'static str,
    pub ok: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<FieldCheck>,
    /// Whether the orientations admit 2-periodic juggling (symmetric about the vertical).
    pub periodic_feasible: bool,
}

impl ValidationReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.ok)
    }

    pub fn failures(&self) -> impl Iterator<Item = &FieldCheck> {
        self.checks.iter().filter(|c| !c.ok)
    }

    pub fn into_result(self) -> Result<Self> {
        if self.all_pass() {
            Ok(self)
        } else {
            let msg = self
                .failures()
                .map(|c| format!("{}: {}", c.field, c.detail))
                .collect::<Vec<_>>()
                .join("; ");
            Err(Error::Invalid(msg))
        }
    }
}

fn check(field: &'static str, ok: bool, detail: impl Into<String>) -> FieldCheck {
    FieldCheck {
        field,
        ok,
        detail: detail.into(),
    }
}

fn positive(field: &'static str, x: f64) -> FieldCheck {
    check(
        field,
        x.is_finite() && x > 0.0,
        format!("{x} must be finite and > 0"),
    )
}

fn open_interval(field: &'static str, x: f64, lo: f64, hi: f64) -> FieldCheck {
    check(
        field,
        x.is_finite() && x > lo && x < hi,
        format!("{x} must lie in ({lo}, {hi})"),
    )
}

fn unit_rate(field: &'static str, x: f64) -> FieldCheck {
    check(
        field,
        x.is_finite() && (0.0..1.0).contains(&x),
        format!("{x} must lie in [0, 1)"),
    )
}

/// Field-by-field check of stick and constraint parameters. Never fails; inspect the report.
pub fn validate(spec: &JuggleSpec, params: &StickParams) -> ValidationReport {
    let checks = vec![
        positive("m", params.m),
        positive("ell", params.ell),
        positive("J", params.j),
        positive("g", params.g),
        open_interval("theta_odd", spec.theta_odd, 0.0, FRAC_PI_2),
        open_interval("theta_even", spec.theta_even, FRAC_PI_2, PI),
        positive("delta_theta_star", spec.delta_theta_star()),
        positive("alpha", spec.alpha),
        positive("beta", spec.beta),
        unit_rate("lambda_x", spec.lambda_x),
        unit_rate("lambda_y", spec.lambda_y),
    ];
    ValidationReport {
        checks,
        periodic_feasible: spec.is_symmetric(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_spec() -> JuggleSpec {
        JuggleSpec::symmetric(PI / 6.0, 0.6131, 3.0, 0.5)
    }

    #[test]
    fn reference_parameters_pass() {
        let p = StickParams::uniform_rod(0.1, 0.5);
        let r = validate(&reference_spec(), &p);
        assert!(r.all_pass(), "{:?}", r.failures().collect::<Vec<_>>());
        assert!(r.periodic_feasible);
        assert!((reference_spec().delta_theta_star() - 2.0 * PI / 3.0).abs() < 1e-15);
        assert_eq!(p.j, 0.1 * 0.25 / 12.0);
    }

    #[test]
    fn theta_odd_at_right_angle_fails() {
        let spec = JuggleSpec {
            theta_odd: FRAC_PI_2,
            ..reference_spec()
        };
        let r = validate(&spec, &StickParams::uniform_rod(0.1, 0.5));
        let bad: Vec<_> = r.failures().map(|c| c.field).collect();
        assert_eq!(bad, vec!["theta_odd"]);
    }

    #[test]
    fn asymmetric_orientations_are_valid_but_not_periodic() {
        let spec = JuggleSpec {
            theta_even: 2.0 * PI / 3.0,
            ..reference_spec()
        };
        let r = validate(&spec, &StickParams::uniform_rod(0.1, 0.5));
        assert!(r.all_pass());
        assert!(!r.periodic_feasible);
    }

    #[test]
    fn lambda_of_one_is_rejected() {
        let spec = JuggleSpec {
            lambda_y: 1.0,
            ..reference_spec()
        };
        let r = validate(&spec, &StickParams::uniform_rod(0.1, 0.5));
        assert!(r.clone().into_result().is_err());
        assert_eq!(r.failures().count(), 1);
    }

    #[test]
    fn impulse_index_parity() {
        let k = ImpulseIndex::FIRST;
        assert!(k.is_odd());
        assert_eq!(k.sign(), -1.0);
        assert_eq!(k.next().sign(), 1.0);
        assert!(ImpulseIndex::new(0).is_err());
    }
}
