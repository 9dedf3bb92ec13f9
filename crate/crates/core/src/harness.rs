//! Closed-loop episodes: constraint controller at every impulse, optional
//! orbit correction at odd impulses, with per-impulse logging.

use std::time::{Duration, Instant};

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::dvhc::{dvhc_control, residuals, RodPolicy};
use crate::dynamics::{advance, impulsive_update, sample_flight};
use crate::error::{Error, Result};
use crate::model::{FullState, ImpulseIndex, JuggleSpec, StickParams};
use crate::stabilizer::{to_section, SectionState, Stabilizer};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub k_max: u32,
    pub rod_policy: RodPolicy,
    /// Flight trajectory sampling interval; `None` disables sampling.
    pub sample_dt: Option<f64>,
    /// An initial orientation this close to `theta_odd` is snapped onto it.
    /// Covers initial conditions quoted to four decimals.
    pub initial_snap_tol: f64,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            k_max: 20,
            rod_policy: RodPolicy::Strict,
            sample_dt: None,
            initial_snap_tol: 5e-5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub k: u32,
    /// Time of this impulse since the first one.
    pub t: f64,
    pub theta: f64,
    pub omega: f64,
    pub rho: Vector2<f64>,
    pub drho: Vector2<f64>,
    pub delta: f64,
    /// Applied impulse and offset, including any correction.
    pub impulse: f64,
    pub offset: f64,
    /// Orbit correction, when one was applied.
    pub u: Option<Vector2<f64>>,
    /// `|z - z*|` at odd impulses of a stabilized episode.
    pub section_error: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub hx: f64,
    pub hy: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    Completed,
    Failed { k: u32, error: Error },
}

impl Termination {
    pub fn is_completed(&self) -> bool {
        matches!(self, Termination::Completed)
    }

    pub fn describe(&self) -> String {
        match self {
            Termination::Completed => "completed".to_string(),
            Termination::Failed { k, error } => format!("failed at k={k}: {error}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EpisodeLog {
    pub spec: JuggleSpec,
    pub records: Vec<StepRecord>,
    pub trajectory: Vec<TrajectoryPoint>,
    pub target: Option<SectionState>,
    pub final_state: FullState,
    pub termination: Termination,
    pub wall_clock: Duration,
}

impl EpisodeLog {
    /// Time from the first to the last logged impulse.
    pub fn elapsed(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.t)
    }

    /// True when records, trajectory and outcome are identical (wall clock aside).
    pub fn same_outcome(&self, other: &EpisodeLog) -> bool {
        self.records == other.records
            && self.trajectory == other.trajectory
            && self.termination == other.termination
            && self.final_state == other.final_state
    }
}

fn snap_initial(s0: &FullState, spec: &JuggleSpec, tol: f64) -> Result<FullState> {
    if (s0.theta - spec.theta_odd).abs() <= tol {
        Ok(FullState {
            theta: spec.theta_odd,
            ..*s0
        })
    } else {
        Err(Error::OffSchedule {
            theta: s0.theta,
            expected: spec.theta_odd,
            k: 1,
        })
    }
}

/// Run up to `cfg.k_max` impulses from `s0` (which must sit at `theta_odd`).
/// Controller or plant errors end the episode and are recorded in the log.
pub fn run_episode(
    s0: &FullState,
    spec: &JuggleSpec,
    p: &StickParams,
    cfg: &EpisodeConfig,
    stabilizer: Option<&Stabilizer>,
) -> EpisodeLog {
    let started = Instant::now();
    let mut log = EpisodeLog {
        spec: *spec,
        records: Vec::with_capacity(cfg.k_max as usize),
        trajectory: Vec::new(),
        target: stabilizer.map(|s| s.lin.z_star),
        final_state: *s0,
        termination: Termination::Completed,
        wall_clock: Duration::ZERO,
    };
    let outcome = drive(s0, spec, p, cfg, stabilizer, &mut log);
    if let Err((k, error)) = outcome {
        log.termination = Termination::Failed { k, error };
    }
    log.wall_clock = started.elapsed();
    log
}

fn drive(
    s0: &FullState,
    spec: &JuggleSpec,
    p: &StickParams,
    cfg: &EpisodeConfig,
    stabilizer: Option<&Stabilizer>,
    log: &mut EpisodeLog,
) -> std::result::Result<(), (u32, Error)> {
    let mut s = snap_initial(s0, spec, cfg.initial_snap_tol).map_err(|e| (1, e))?;
    log.final_state = s;
    let mut t = 0.0;
    let mut k = ImpulseIndex::FIRST;
    while k.get() <= cfg.k_max {
        let at = |e: Error| (k.get(), e);
        let res = residuals(&s, k, spec, p).map_err(at)?;
        let cmd = dvhc_control(&s, k, spec, p, cfg.rod_policy).map_err(at)?;

        let mut u = None;
        let mut section_error = None;
        if let (Some(stab), true) = (stabilizer, k.is_odd()) {
            let z = to_section(&s, spec).map_err(at)?;
            section_error = Some(stab.error(&z));
            let du = stab.correction(&z);
            if du != Vector2::zeros() {
                u = Some(du);
            }
        }
        let du = u.unwrap_or_else(Vector2::zeros);
        let impulse = cmd.impulse + du.x;
        let offset = cmd.offset + du.y;
        let (next, delta) = advance(&s, k, impulse, offset, spec, p).map_err(at)?;

        if let Some(dt) = cfg.sample_dt {
            let s_plus = impulsive_update(&s, impulse, offset, p).map_err(at)?;
            let samples = sample_flight(&s_plus, delta, dt, p).map_err(at)?;
            // the end of one flight is the start of the next
            let skip = usize::from(!log.trajectory.is_empty());
            log.trajectory
                .extend(samples.iter().skip(skip).map(|smp| TrajectoryPoint {
                    t: t + smp.t,
                    hx: smp.state.h.x,
                    hy: smp.state.h.y,
                    theta: smp.state.theta,
                }));
        }

        log.records.push(StepRecord {
            k: k.get(),
            t,
            theta: s.theta,
            omega: s.omega,
            rho: res.rho,
            drho: res.drho,
            delta,
            impulse,
            offset,
            u,
            section_error,
        });
        t += delta;
        s = next;
        log.final_state = s;
        k = k.next();
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub impulse_count: usize,
    pub elapsed: f64,
    pub completed: bool,
    pub termination: String,
    /// `rho_{k+1} / rho_k` per component, where `|rho_k|` is not negligible.
    pub rho_ratios: Vec<[Option<f64>; 2]>,
    /// Worst deviation from `rho_{k+1} = lambda rho_k` over uncorrected steps.
    pub max_rho_law_error: f64,
    /// Worst deviation from `Drho_{k+1} = (lambda - 1) rho_k / delta_k` over uncorrected steps.
    pub max_drho_law_error: f64,
    /// `omega_{k+2} / omega_k` for odd `k`.
    pub omega_two_step_ratios: Vec<f64>,
    pub terminal_orbit_error: Option<f64>,
    pub corrections_applied: usize,
    pub last_correction_k: Option<u32>,
}

const NEGLIGIBLE_RHO: f64 = 1e-12;

pub fn metrics(log: &EpisodeLog) -> Result<Metrics> {
    if log.records.is_empty() {
        return Err(Error::EmptyLog);
    }
    let lam = log.spec.lambda();
    let mut rho_ratios = Vec::new();
    let mut max_rho = 0.0_f64;
    let mut max_drho = 0.0_f64;
    for w in log.records.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let ratio = |i: usize| (a.rho[i].abs() > NEGLIGIBLE_RHO).then(|| b.rho[i] / a.rho[i]);
        rho_ratios.push([ratio(0), ratio(1)]);
        if a.u.is_none() {
            max_rho = max_rho.max((b.rho - lam.component_mul(&a.rho)).amax());
            let law = (lam - Vector2::repeat(1.0)).component_mul(&a.rho) / a.delta;
            max_drho = max_drho.max((b.drho - law).amax());
        }
    }
    let omega_two_step_ratios = log
        .records
        .windows(3)
        .filter(|w| w[0].k % 2 == 1)
        .map(|w| w[2].omega / w[0].omega)
        .collect();
    let terminal_orbit_error = log
        .records
        .iter()
        .rev()
        .find_map(|r| r.section_error);
    let corrections: Vec<u32> = log
        .records
        .iter()
        .filter(|r| r.u.is_some())
        .map(|r| r.k)
        .collect();
    Ok(Metrics {
        impulse_count: log.records.len(),
        elapsed: log.elapsed(),
        completed: log.termination.is_completed(),
        termination: log.termination.describe(),
        rho_ratios,
        max_rho_law_error: max_rho,
        max_drho_law_error: max_drho,
        omega_two_step_ratios,
        terminal_orbit_error,
        corrections_applied: corrections.len(),
        last_correction_k: corrections.last().copied(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dvhc::{phi, psi};
    use crate::dzd::design_orbit;
    use crate::stabilizer::StabilizerDesign;
    use std::f64::consts::PI;

    fn params() -> StickParams {
        StickParams::uniform_rod(0.1, 0.5)
    }

    fn spec() -> JuggleSpec {
        JuggleSpec::symmetric(PI / 6.0, 0.6131, 3.0, 0.5)
    }

    fn reference_start() -> FullState {
        FullState::new(0.7, 2.5, 0.5236, 0.9, -2.0, -5.7)
    }

    #[test]
    fn unconstrained_start_converges_and_halves_residuals() {
        let log = run_episode(
            &reference_start(),
            &spec(),
            &params(),
            &EpisodeConfig::default(),
            None,
        );
        assert!(log.termination.is_completed());
        assert_eq!(log.records.len(), 20);
        let m = metrics(&log).unwrap();
        assert!(m.max_rho_law_error < 1e-9);
        assert!(m.max_drho_law_error < 1e-9);
        for r in m.rho_ratios.iter().flatten().flatten() {
            assert!((r - 0.5).abs() < 1e-6);
        }
        assert!((log.elapsed() - 9.80).abs() < 0.05);
        for (i, r) in log.records.iter().enumerate() {
            assert_eq!(r.k as usize, i + 1);
            assert_eq!(r.theta, spec().theta_at(ImpulseIndex::new(r.k).unwrap()));
        }
    }

    #[test]
    fn on_orbit_start_stays_put() {
        let p = params();
        let sp = spec();
        let w = -PI / 3.0 * (p.g / sp.alpha).sqrt();
        let orbit = design_orbit(&sp, w, &p).unwrap();
        let stab = Stabilizer::synthesize(&orbit, &p, &StabilizerDesign::default()).unwrap();
        let h = phi(sp.theta_odd, &sp).unwrap();
        let v = psi(sp.theta_odd, w, ImpulseIndex::FIRST, &sp, &p).unwrap();
        let s0 = FullState {
            h,
            v,
            theta: sp.theta_odd,
            omega: w,
        };
        let log = run_episode(&s0, &sp, &p, &EpisodeConfig::default(), Some(&stab));
        assert!(log.termination.is_completed());
        for r in &log.records {
            assert!(r.rho.amax() < 1e-9);
            assert!(r.u.is_none());
        }
        let m = metrics(&log).unwrap();
        assert!(m.terminal_orbit_error.unwrap() < 1e-9);
        assert_eq!(m.corrections_applied, 0);
    }

    #[test]
    fn failures_are_recorded_not_raised() {
        let s0 = FullState::new(0.7, 2.5, 0.5236, 0.9, -2.0, 5.7);
        let log = run_episode(&s0, &spec(), &params(), &EpisodeConfig::default(), None);
        assert!(matches!(
            log.termination,
            Termination::Failed {
                k: 1,
                error: Error::WrongRotationSign { .. }
            }
        ));
        assert!(log.records.is_empty());
        assert_eq!(metrics(&log), Err(Error::EmptyLog));

        let off = FullState::new(0.7, 2.5, 0.6, 0.9, -2.0, -5.7);
        let log = run_episode(&off, &spec(), &params(), &EpisodeConfig::default(), None);
        assert!(matches!(
            log.termination,
            Termination::Failed {
                error: Error::OffSchedule { .. },
                ..
            }
        ));
    }

    #[test]
    fn trajectory_is_continuous_in_time() {
        let cfg = EpisodeConfig {
            k_max: 4,
            sample_dt: Some(0.05),
            ..EpisodeConfig::default()
        };
        let log = run_episode(&reference_start(), &spec(), &params(), &cfg, None);
        let ts: Vec<f64> = log.trajectory.iter().map(|p| p.t).collect();
        assert!(ts.windows(2).all(|w| w[1] > w[0]));
        let total: f64 = log.records.iter().map(|r| r.delta).sum();
        assert!((ts.last().unwrap() - total).abs() < 1e-12);
    }

    #[test]
    fn episodes_are_deterministic() {
        let cfg = EpisodeConfig {
            sample_dt: Some(0.01),
            ..EpisodeConfig::default()
        };
        let a = run_episode(&reference_start(), &spec(), &params(), &cfg, None);
        let b = run_episode(&reference_start(), &spec(), &params(), &cfg, None);
        assert!(a.same_outcome(&b));
    }
}
