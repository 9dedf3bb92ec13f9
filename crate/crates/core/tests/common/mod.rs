#![allow(dead_code)]

use std::f64::consts::PI;

use devilstick::dvhc::{phi, psi};
use devilstick::{FullState, ImpulseIndex, JuggleSpec, StickParams};
use nalgebra::DMatrix;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub fn params() -> StickParams {
    StickParams::uniform_rod(0.1, 0.5)
}

pub fn spec() -> JuggleSpec {
    JuggleSpec::symmetric(PI / 6.0, 0.6131, 3.0, 0.5)
}

/// Initial orientation as quoted, four decimals.
#[allow(clippy::approx_constant)]
pub const IC: [f64; 6] = [0.7, 2.5, 0.5236, 0.9, -2.0, -5.7];

pub fn initial() -> FullState {
    FullState::new(IC[0], IC[1], IC[2], IC[3], IC[4], IC[5])
}

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

/// Reference return-map Jacobians for the symmetric orbit at omega* = -4.1888.
pub fn printed_a() -> DMatrix<f64> {
    DMatrix::from_row_slice(
        5,
        5,
        &[
            0.25, 0.0, 0.0, -0.0, -0.0, //
            0.0, 0.25, 0.0, 0.0, 0.0, //
            -0.25, 0.4329, 0.5001, 0.2887, 0.0, //
            0.4331, 0.2495, 0.8659, 0.4999, 0.0, //
            -0.7398, -1.2807, -1.4794, -0.8541, -0.0,
        ],
    )
}

pub fn printed_b() -> DMatrix<f64> {
    DMatrix::from_row_slice(
        5,
        2,
        &[
            -0.0, 20.3351, //
            4.2847, 31.1748, //
            -12.2873, -111.2006, //
            -30.0787, -200.6851, //
            36.3492, 221.3658,
        ],
    )
}

pub fn printed_k() -> DMatrix<f64> {
    DMatrix::from_row_slice(
        2,
        5,
        &[
            0.0961, 0.0358, 0.0398, 0.0230, 0.0, //
            -0.0124, -0.0017, -0.0006, -0.0003, 0.0,
        ],
    )
}

pub const PRINTED_Z_STAR: [f64; 5] = [0.3540, 3.0000, 1.4160, -2.4525, -4.1888];

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax()
}

/// Random specification with orientations in the admissible quadrants.
pub fn random_spec<R: Rng>(r: &mut R, symmetric: bool) -> JuggleSpec {
    let theta_odd = r.gen_range(0.15..1.35);
    let theta_even = if symmetric {
        PI - theta_odd
    } else {
        loop {
            let t = r.gen_range(PI / 2.0 + 0.15..PI - 0.15);
            if (t - (PI - theta_odd)).abs() > 0.05 {
                break t;
            }
        }
    };
    JuggleSpec {
        theta_odd,
        theta_even,
        alpha: r.gen_range(0.2..1.5),
        beta: r.gen_range(1.0..4.0),
        lambda_x: r.gen_range(0.0..0.95),
        lambda_y: r.gen_range(0.0..0.95),
    }
}

/// Rate with the sign required at impulse `k`.
pub fn random_rate<R: Rng>(r: &mut R, k: ImpulseIndex) -> f64 {
    k.sign() * r.gen_range(1.0..10.0)
}

/// A state satisfying both constraints at impulse `k`.
pub fn on_constraint(spec: &JuggleSpec, p: &StickParams, k: ImpulseIndex, omega: f64) -> FullState {
    let theta = spec.theta_at(k);
    let h = phi(theta, spec).unwrap();
    let v = psi(theta, omega, k, spec, p).unwrap();
    FullState::new(h.x, h.y, theta, v.x, v.y, omega)
}
