//! Scenario files: TOML with units in the key names. Unknown keys are errors.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dvhc::RodPolicy;
use crate::dzd::{design_orbit, symmetric_omega_star, OrbitSpec};
use crate::harness::EpisodeConfig;
use crate::model::{validate, FullState, JuggleSpec, StickParams};
use crate::stabilizer::{
    FdScheme, FdStep, LinearizeOptions, StabilizerDesign, DEFAULT_DEADBAND, INPUT_DIM, STATE_DIM,
};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: Option<String>,
    pub stick: StickSection,
    pub constraint: ConstraintSection,
    pub initial: InitialSection,
    #[serde(default)]
    pub episode: EpisodeSection,
    pub orbit: Option<OrbitSection>,
    pub analyze: Option<AnalyzeSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StickSection {
    pub mass_kg: f64,
    pub length_m: f64,
    /// Defaults to a uniform rod, `m l^2 / 12`.
    pub inertia_kgm2: Option<f64>,
    pub gravity_mps2: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintSection {
    pub theta_odd_rad: f64,
    /// Defaults to `pi - theta_odd`.
    pub theta_even_rad: Option<f64>,
    pub alpha_m: f64,
    pub beta_m: f64,
    pub lambda_x: f64,
    pub lambda_y: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub hx_m: f64,
    pub hy_m: f64,
    pub theta_rad: f64,
    pub vx_mps: f64,
    pub vy_mps: f64,
    pub omega_radps: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpisodeSection {
    #[serde(default = "default_k_max")]
    pub k_max: u32,
    #[serde(default)]
    pub rod_policy: RodPolicy,
    pub sample_dt_s: Option<f64>,
    pub initial_snap_tol_rad: Option<f64>,
}

fn default_k_max() -> u32 {
    20
}

impl Default for EpisodeSection {
    fn default() -> Self {
        Self {
            k_max: default_k_max(),
            rod_policy: RodPolicy::Strict,
            sample_dt_s: None,
            initial_snap_tol_rad: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbitSection {
    /// Defaults to the orbit symmetric in angular rate.
    pub omega_star_radps: Option<f64>,
    /// Apply the orbit correction during `simulate`.
    #[serde(default = "yes")]
    pub stabilize: bool,
    pub q_diag: Option<Vec<f64>>,
    pub r_diag: Option<Vec<f64>>,
    pub deadband: Option<f64>,
    pub fd_scheme: Option<FdScheme>,
    /// `"relative"` (scaled by `max(1, |x|)`) or `"absolute"`.
    pub fd_step_kind: Option<String>,
    pub fd_step: Option<f64>,
    pub fd_check_halving: Option<bool>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeSection {
    pub omega_star_sweep_radps: Vec<f64>,
}

/// A validated scenario, ready to run.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub source: Option<PathBuf>,
    pub params: StickParams,
    pub spec: JuggleSpec,
    pub initial: FullState,
    pub episode: EpisodeConfig,
    /// Orbit settings; `None` when the file has no `[orbit]` table.
    pub orbit: Option<OrbitSettings>,
    pub sweep: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct OrbitSettings {
    pub omega_star: Option<f64>,
    pub stabilize: bool,
    pub design: StabilizerDesign,
}

impl Scenario {
    pub fn stabilize(&self) -> bool {
        self.orbit.as_ref().is_some_and(|o| o.stabilize)
    }

    /// The orbit named in the scenario, or the rate-symmetric one.
    pub fn target_orbit(&self) -> crate::Result<OrbitSpec> {
        let w = match self.orbit.as_ref().and_then(|o| o.omega_star) {
            Some(w) => w,
            None => symmetric_omega_star(&self.spec, &self.params)?,
        };
        design_orbit(&self.spec, w, &self.params)
    }

    pub fn design(&self) -> StabilizerDesign {
        self.orbit
            .as_ref()
            .map(|o| o.design.clone())
            .unwrap_or_default()
    }
}

fn diag(values: Option<Vec<f64>>, n: usize, default: f64, key: &str) -> anyhow::Result<DMatrix<f64>> {
    match values {
        None => Ok(DMatrix::identity(n, n) * default),
        Some(v) if v.len() == n => Ok(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(v))),
        Some(v) => bail!("orbit.{key} must have {n} entries, got {}", v.len()),
    }
}

impl ScenarioFile {
    pub fn into_scenario(self, source: Option<&Path>) -> anyhow::Result<Scenario> {
        let mut params = StickParams::uniform_rod(self.stick.mass_kg, self.stick.length_m);
        if let Some(j) = self.stick.inertia_kgm2 {
            params = params.with_inertia(j);
        }
        if let Some(g) = self.stick.gravity_mps2 {
            params = params.with_gravity(g);
        }
        let c = &self.constraint;
        let spec = JuggleSpec {
            theta_odd: c.theta_odd_rad,
            theta_even: c.theta_even_rad.unwrap_or(PI - c.theta_odd_rad),
            alpha: c.alpha_m,
            beta: c.beta_m,
            lambda_x: c.lambda_x,
            lambda_y: c.lambda_y,
        };
        validate(&spec, &params)
            .into_result()
            .context("scenario failed validation")?;

        let i = &self.initial;
        let initial = FullState::new(i.hx_m, i.hy_m, i.theta_rad, i.vx_mps, i.vy_mps, i.omega_radps);
        if !initial.is_finite() {
            bail!("initial state must be finite");
        }

        let e = &self.episode;
        if e.k_max < 1 {
            bail!("episode.k_max must be at least 1");
        }
        if let Some(dt) = e.sample_dt_s {
            if !(dt > 0.0) {
                bail!("episode.sample_dt_s must be positive, got {dt}");
            }
        }
        let mut episode = EpisodeConfig {
            k_max: e.k_max,
            rod_policy: e.rod_policy,
            sample_dt: e.sample_dt_s,
            ..EpisodeConfig::default()
        };
        if let Some(tol) = e.initial_snap_tol_rad {
            episode.initial_snap_tol = tol;
        }

        let orbit = match self.orbit {
            None => None,
            Some(o) => {
                if let Some(w) = o.omega_star_radps {
                    if !(w < 0.0) {
                        bail!("orbit.omega_star_radps must be negative, got {w}");
                    }
                }
                let mut fd = LinearizeOptions::default();
                if let Some(s) = o.fd_scheme {
                    fd.scheme = s;
                }
                let h = o.fd_step.unwrap_or(1e-6);
                if !(h > 0.0) {
                    bail!("orbit.fd_step must be positive, got {h}");
                }
                fd.step = match o.fd_step_kind.as_deref() {
                    None | Some("relative") => FdStep::Relative(h),
                    Some("absolute") => FdStep::Absolute(h),
                    Some(other) => bail!("orbit.fd_step_kind: unknown value {other:?}"),
                };
                if let Some(chk) = o.fd_check_halving {
                    fd.check_halving = chk;
                }
                let deadband = o.deadband.unwrap_or(DEFAULT_DEADBAND);
                if !(deadband >= 0.0) {
                    bail!("orbit.deadband must be non-negative");
                }
                Some(OrbitSettings {
                    omega_star: o.omega_star_radps,
                    stabilize: o.stabilize,
                    design: StabilizerDesign {
                        q: diag(o.q_diag, STATE_DIM, 1.0, "q_diag")?,
                        r: diag(o.r_diag, INPUT_DIM, 2.0, "r_diag")?,
                        deadband,
                        fd,
                    },
                })
            }
        };

        let name = self.name.clone().unwrap_or_else(|| {
            source
                .and_then(|p| p.file_stem())
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "scenario".into())
        });
        Ok(Scenario {
            name,
            source: source.map(Path::to_path_buf),
            params,
            spec,
            initial,
            episode,
            orbit,
            sweep: self
                .analyze
                .map(|a| a.omega_star_sweep_radps)
                .unwrap_or_default(),
        })
    }
}

pub fn parse_scenario(text: &str, source: Option<&Path>) -> anyhow::Result<Scenario> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| {
        let origin = source.map_or("<scenario>".into(), |p| p.display().to_string());
        anyhow::anyhow!("{origin}: {e}")
    })?;
    file.into_scenario(source)
}

pub fn load_scenario(path: &Path) -> anyhow::Result<Scenario> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading scenario {}", path.display()))?;
    parse_scenario(&text, Some(path))
}

pub const SIM_VHC: &str = include_str!("../../scenarios/sim-vhc.toml");
pub const SIM_ORBIT: &str = include_str!("../../scenarios/sim-orbit.toml");

/// Scenarios shipped with the binary, addressable by name.
pub fn builtin(name: &str) -> Option<&'static str> {
    match name {
        "sim-vhc" => Some(SIM_VHC),
        "sim-orbit" => Some(SIM_ORBIT),
        _ => None,
    }
}

/// A path on disk, or the name of a shipped scenario.
pub fn resolve_scenario(arg: &str) -> anyhow::Result<Scenario> {
    let path = Path::new(arg);
    if path.exists() {
        return load_scenario(path);
    }
    match builtin(arg) {
        Some(text) => parse_scenario(text, Some(Path::new(&format!("{arg}.toml")))),
        None => bail!("no scenario file or built-in scenario named {arg:?}"),
    }
}
