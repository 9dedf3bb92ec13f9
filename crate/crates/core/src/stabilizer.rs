//! Orbital stabilization through the impulse-controlled return map.
//!
//! The section is `theta = theta_odd, omega < 0`; on it the state reduces to
//! `z = [hx, hy, vx, vy, omega]`. One return takes two impulses: the odd one
//! carries the corrective input `u = [dI, dr]` on top of the constraint
//! controller, the even one is the constraint controller alone.

use nalgebra::{DMatrix, DVector, SVector, Vector2};
use serde::{Deserialize, Serialize};

use crate::dvhc::{dvhc_control, phi, psi, steady_inputs, RodPolicy, SCHEDULE_MATCH_TOL};
use crate::dynamics::advance;
use crate::dzd::OrbitSpec;
use crate::error::{Error, Result};
use crate::model::{FullState, ImpulseIndex, JuggleSpec, StickParams};

pub type Vector5 = SVector<f64, 5>;

pub const STATE_DIM: usize = 5;
pub const INPUT_DIM: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectionState {
    pub z: Vector5,
}

impl SectionState {
    pub fn new(hx: f64, hy: f64, vx: f64, vy: f64, omega: f64) -> Self {
        Self {
            z: Vector5::new(hx, hy, vx, vy, omega),
        }
    }

    pub fn omega(&self) -> f64 {
        self.z[4]
    }
}

pub fn to_section(s: &FullState, spec: &JuggleSpec) -> Result<SectionState> {
    let on_angle = (s.theta - spec.theta_odd).abs() <= SCHEDULE_MATCH_TOL;
    if !on_angle || !(s.omega < 0.0) || !s.is_finite() {
        return Err(Error::NotOnSection {
            theta: s.theta,
            omega: s.omega,
        });
    }
    Ok(SectionState::new(s.h.x, s.h.y, s.v.x, s.v.y, s.omega))
}

pub fn from_section(z: &SectionState, spec: &JuggleSpec) -> FullState {
    FullState::new(z.z[0], z.z[1], spec.theta_odd, z.z[2], z.z[3], z.z[4])
}

/// One return to the section with corrective input `u` added to the
/// constraint controller at the odd impulse.
pub fn poincare_map(
    z: &SectionState,
    u: &Vector2<f64>,
    orbit: &OrbitSpec,
    p: &StickParams,
) -> Result<SectionState> {
    let spec = &orbit.spec;
    let odd = ImpulseIndex::FIRST;
    let s = from_section(z, spec);
    let cmd = dvhc_control(&s, odd, spec, p, RodPolicy::Strict)?;
    let (s, _) = advance(&s, odd, cmd.impulse + u.x, cmd.offset + u.y, spec, p)?;
    let even = odd.next();
    let cmd = dvhc_control(&s, even, spec, p, RodPolicy::Strict)?;
    let (s, _) = advance(&s, even, cmd.impulse, cmd.offset, spec, p)?;
    to_section(&s, spec)
}

/// Section point of the orbit and the odd-impulse inputs that hold it there.
pub fn fixed_point(orbit: &OrbitSpec, p: &StickParams) -> Result<(SectionState, f64, f64)> {
    let spec = &orbit.spec;
    let odd = ImpulseIndex::FIRST;
    let h = phi(spec.theta_odd, spec)?;
    let v = psi(spec.theta_odd, orbit.omega_star, odd, spec, p)?;
    let cmd = steady_inputs(orbit.omega_star, odd, spec, p)?;
    Ok((
        SectionState::new(h.x, h.y, v.x, v.y, orbit.omega_star),
        cmd.impulse,
        cmd.offset,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FdScheme {
    Central,
    Forward,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FdStep {
    /// `h_rel * max(1, |x_i|)` for coordinate `i`.
    Relative(f64),
    Absolute(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearizeOptions {
    pub scheme: FdScheme,
    pub step: FdStep,
    /// Recompute with half the step and require agreement.
    pub check_halving: bool,
}

impl Default for LinearizeOptions {
    fn default() -> Self {
        Self {
            scheme: FdScheme::Central,
            step: FdStep::Relative(1e-6),
            check_halving: true,
        }
    }
}

impl LinearizeOptions {
    /// One-sided differences with a fixed step of 2e-3 in every coordinate.
    /// This reproduces the commonly quoted matrices for the symmetric orbit to
    /// about 1e-2; the input columns are strongly nonlinear at this scale, so
    /// the halving check is off.
    pub fn coarse_forward() -> Self {
        Self {
            scheme: FdScheme::Forward,
            step: FdStep::Absolute(2e-3),
            check_halving: false,
        }
    }

    fn step_for(&self, x: f64, scale: f64) -> f64 {
        match self.step {
            FdStep::Relative(h) => h * x.abs().max(1.0) * scale,
            FdStep::Absolute(h) => h * scale,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearizedMap {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub z_star: SectionState,
    pub u_star: Vector2<f64>,
}

fn jacobians(
    orbit: &OrbitSpec,
    p: &StickParams,
    z_star: &SectionState,
    u_star: &Vector2<f64>,
    opts: &LinearizeOptions,
    scale: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let base = match opts.scheme {
        FdScheme::Forward => Some(poincare_map(z_star, &Vector2::zeros(), orbit, p)?.z),
        FdScheme::Central => None,
    };
    let eval = |dz: &Vector5, du: &Vector2<f64>| -> Result<Vector5> {
        let z = SectionState { z: z_star.z + dz };
        Ok(poincare_map(&z, du, orbit, p)?.z)
    };
    let column = |dz: Vector5, du: Vector2<f64>, h: f64| -> Result<Vector5> {
        match base {
            Some(f0) => Ok((eval(&dz, &du)? - f0) / h),
            None => Ok((eval(&dz, &du)? - eval(&-dz, &-du)?) / (2.0 * h)),
        }
    };

    let mut a = DMatrix::zeros(STATE_DIM, STATE_DIM);
    for i in 0..STATE_DIM {
        let h = opts.step_for(z_star.z[i], scale);
        let mut dz = Vector5::zeros();
        dz[i] = h;
        a.set_column(i, &column(dz, Vector2::zeros(), h)?);
    }
    let mut b = DMatrix::zeros(STATE_DIM, INPUT_DIM);
    for i in 0..INPUT_DIM {
        let h = opts.step_for(u_star[i], scale);
        let mut du = Vector2::zeros();
        du[i] = h;
        b.set_column(i, &column(Vector5::zeros(), du, h)?);
    }
    Ok((a, b))
}

fn halving_check(which: &'static str, coarse: &DMatrix<f64>, fine: &DMatrix<f64>) -> Result<()> {
    for r in 0..coarse.nrows() {
        for c in 0..coarse.ncols() {
            let (x, y) = (coarse[(r, c)], fine[(r, c)]);
            if (x - y).abs() > 1e-4_f64.max(1e-3 * y.abs()) {
                return Err(Error::FdInconsistent {
                    which,
                    row: r,
                    col: c,
                    coarse: x,
                    fine: y,
                });
            }
        }
    }
    Ok(())
}

/// Finite-difference linearization of the return map about the orbit's fixed point.
pub fn linearize(
    orbit: &OrbitSpec,
    p: &StickParams,
    opts: &LinearizeOptions,
) -> Result<LinearizedMap> {
    let (z_star, i_star, r_star) = fixed_point(orbit, p)?;
    let u_star = Vector2::new(i_star, r_star);
    let (a, b) = jacobians(orbit, p, &z_star, &u_star, opts, 1.0)?;
    if opts.check_halving {
        let (a2, b2) = jacobians(orbit, p, &z_star, &u_star, opts, 0.5)?;
        halving_check("A", &a, &a2)?;
        halving_check("B", &b, &b2)?;
    }
    Ok(LinearizedMap {
        a,
        b,
        z_star,
        u_star,
    })
}

/// `[B, AB, ..., A^(n-1) B]`.
pub fn controllability_matrix(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n {
        return Err(Error::Dimension(format!(
            "A is {}x{}, B is {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    let m = b.ncols();
    let mut out = DMatrix::zeros(n, n * m);
    let mut block = b.clone();
    for i in 0..n {
        out.view_mut((0, i * m), (n, m)).copy_from(&block);
        block = a * block;
    }
    Ok(out)
}

/// Numerical rank of the controllability matrix and whether it is full.
pub fn controllability(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<(usize, bool)> {
    let n = a.nrows();
    let c = controllability_matrix(a, b)?;
    let sv = c.singular_values();
    let smax = sv.max();
    if smax == 0.0 {
        return Ok((0, n == 0));
    }
    let tol = smax * n as f64 * f64::EPSILON * 1e3;
    let rank = sv.iter().filter(|&&s| s > tol).count();
    Ok((rank, rank == n))
}

pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues()
        .iter()
        .map(|l| l.norm())
        .fold(0.0, f64::max)
}

fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn riccati_update(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
    let at = a.transpose();
    let bt = b.transpose();
    let s = r + &bt * p * b;
    let bpa = &bt * p * a;
    let gain = s.clone().cholesky().map(|c| c.solve(&bpa)).or_else(|| s.lu().solve(&bpa))?;
    let next = q + &at * p * a - &at * p * b * &gain;
    // symmetrize against rounding drift
    let next = (&next + next.transpose()) * 0.5;
    Some((next, -gain))
}

/// `Q + A'PA - A'PB (R + B'PB)^-1 B'PA - P`, in the infinity norm.
pub fn dare_residual(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> f64 {
    match riccati_update(a, b, q, r, p) {
        Some((next, _)) => inf_norm(&(next - p)),
        None => f64::INFINITY,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LqrSolution {
    /// `u = K e`, stabilizing (the minus sign is folded in).
    pub k: DMatrix<f64>,
    pub p: DMatrix<f64>,
    pub iterations: usize,
    pub spectral_radius: f64,
}

pub const RICCATI_TOL: f64 = 1e-12;
pub const RICCATI_MAX_ITER: usize = 100_000;

/// Infinite-horizon discrete LQR by fixed-point iteration of the Riccati recursion.
pub fn dlqr(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<LqrSolution> {
    let n = a.nrows();
    let m = b.ncols();
    if a.ncols() != n || b.nrows() != n || q.shape() != (n, n) || r.shape() != (m, m) {
        return Err(Error::Dimension(format!(
            "A {:?}, B {:?}, Q {:?}, R {:?}",
            a.shape(),
            b.shape(),
            q.shape(),
            r.shape()
        )));
    }
    let mut p = q.clone();
    for it in 1..=RICCATI_MAX_ITER {
        let (next, _) =
            riccati_update(a, b, q, r, &p).ok_or(Error::RiccatiDiverged(it))?;
        if !next.iter().all(|x| x.is_finite()) {
            return Err(Error::RiccatiDiverged(it));
        }
        let change = inf_norm(&(&next - &p));
        p = next;
        if change < RICCATI_TOL {
            let (_, k) = riccati_update(a, b, q, r, &p).ok_or(Error::RiccatiDiverged(it))?;
            let rho = spectral_radius(&(a + b * &k));
            if rho >= 1.0 - 1e-9 {
                return Err(Error::NotStabilizing(rho));
            }
            return Ok(LqrSolution {
                k,
                p,
                iterations: it,
                spectral_radius: rho,
            });
        }
    }
    Err(Error::RiccatiDiverged(RICCATI_MAX_ITER))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackGain {
    pub k: DMatrix<f64>,
    /// Corrections are withheld while `|z - z*| <= deadband`.
    pub deadband: f64,
}

pub const DEFAULT_DEADBAND: f64 = 1e-3;

/// Corrective input for section state `z`; zero inside the deadband.
pub fn feedback(z: &SectionState, lin: &LinearizedMap, gain: &FeedbackGain) -> Vector2<f64> {
    let e = z.z - lin.z_star.z;
    if e.norm() <= gain.deadband {
        return Vector2::zeros();
    }
    let u: DVector<f64> = &gain.k * DVector::from_column_slice(e.as_slice());
    Vector2::new(u[0], u[1])
}

/// Everything needed to stabilize one orbit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stabilizer {
    pub orbit: OrbitSpec,
    pub lin: LinearizedMap,
    pub gain: FeedbackGain,
    pub controllability_rank: usize,
    pub lqr: LqrSolution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilizerDesign {
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub deadband: f64,
    pub fd: LinearizeOptions,
}

impl Default for StabilizerDesign {
    fn default() -> Self {
        Self {
            q: DMatrix::identity(STATE_DIM, STATE_DIM),
            r: DMatrix::identity(INPUT_DIM, INPUT_DIM) * 2.0,
            deadband: DEFAULT_DEADBAND,
            fd: LinearizeOptions::default(),
        }
    }
}

impl Stabilizer {
    pub fn synthesize(orbit: &OrbitSpec, p: &StickParams, design: &StabilizerDesign) -> Result<Self> {
        let lin = linearize(orbit, p, &design.fd)?;
        let (rank, _) = controllability(&lin.a, &lin.b)?;
        let lqr = dlqr(&lin.a, &lin.b, &design.q, &design.r)?;
        Ok(Self {
            orbit: *orbit,
            gain: FeedbackGain {
                k: lqr.k.clone(),
                deadband: design.deadband,
            },
            lin,
            controllability_rank: rank,
            lqr,
        })
    }

    pub fn correction(&self, z: &SectionState) -> Vector2<f64> {
        feedback(z, &self.lin, &self.gain)
    }

    pub fn error(&self, z: &SectionState) -> f64 {
        (z.z - self.lin.z_star.z).norm()
    }
}
