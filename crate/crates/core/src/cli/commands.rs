//! Subcommand bodies, kept apart from argument parsing so tests can call them.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use log::info;
use serde::Serialize;

use super::output::{
    read_impulses, read_trajectory, summarize, write_impulses, write_text, write_trajectory,
    StabilizerSummary, Summary, IMPULSE_HEADER, TRAJECTORY_HEADER,
};
use super::plot::{impulse_figure, trajectory_figure};
use super::scenario::Scenario;
use crate::dzd::{design_orbit, growth_factor, orbit_inputs, symmetric_omega_star};
use crate::harness::{run_episode, EpisodeLog};
use crate::model::ImpulseIndex;
use crate::stabilizer::{controllability, spectral_radius, Stabilizer};

fn rows(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn stabilizer_summary(stab: &Stabilizer) -> StabilizerSummary {
    StabilizerSummary {
        omega_star: stab.orbit.omega_star,
        z_star: stab.lin.z_star.z.iter().copied().collect(),
        i_star: stab.lin.u_star.x,
        r_star: stab.lin.u_star.y,
        gain: rows(&stab.gain.k),
        controllability_rank: stab.controllability_rank,
        closed_loop_spectral_radius: stab.lqr.spectral_radius,
        deadband: stab.gain.deadband,
    }
}

/// Builds the stabilizer a scenario asks for, if any.
pub fn scenario_stabilizer(sc: &Scenario) -> anyhow::Result<Option<Stabilizer>> {
    if !sc.stabilize() {
        return Ok(None);
    }
    let orbit = sc.target_orbit().context("designing target orbit")?;
    let stab = Stabilizer::synthesize(&orbit, &sc.params, &sc.design())
        .context("synthesizing orbit stabilizer")?;
    Ok(Some(stab))
}

pub struct SimulateOutput {
    pub log: EpisodeLog,
    pub summary: Summary,
    pub files: Vec<PathBuf>,
}

/// Runs a scenario and writes `impulses.csv`, `trajectory.csv` and
/// `summary.json` into `out`. Nothing is written when setup fails.
pub fn simulate(sc: &Scenario, out: &Path) -> anyhow::Result<SimulateOutput> {
    let stab = scenario_stabilizer(sc)?;
    let log = run_episode(&sc.initial, &sc.spec, &sc.params, &sc.episode, stab.as_ref());
    info!(
        "{}: {} impulses, {}",
        sc.name,
        log.records.len(),
        log.termination.describe()
    );
    let summary = summarize(&sc.name, &log, stab.as_ref().map(stabilizer_summary));

    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let impulses = out.join("impulses.csv");
    let mut buf = Vec::new();
    write_impulses(&mut buf, &log.records)?;
    write_text(&impulses, &buf)?;

    let trajectory = out.join("trajectory.csv");
    let mut buf = Vec::new();
    write_trajectory(&mut buf, &log.trajectory)?;
    write_text(&trajectory, &buf)?;

    let summary_path = out.join("summary.json");
    let mut json = serde_json::to_string_pretty(&summary)?;
    json.push('\n');
    write_text(&summary_path, json.as_bytes())?;

    Ok(SimulateOutput {
        log,
        summary,
        files: vec![impulses, trajectory, summary_path],
    })
}

/// Human-readable digest of a finished simulation.
pub fn format_summary(s: &Summary) -> String {
    let mut t = String::new();
    let _ = writeln!(t, "scenario      {}", s.scenario);
    let _ = writeln!(t, "termination   {}", s.termination);
    let _ = writeln!(t, "impulses      {}", s.impulse_count);
    let _ = writeln!(t, "elapsed       {:.4} s", s.elapsed_s);
    for c in [s.last_odd, s.last_even].into_iter().flatten() {
        let _ = writeln!(
            t,
            "k={:<3} omega {:>9.4}  delta {:.4}  I {:>8.4}  r {:.4}",
            c.k, c.omega, c.delta, c.impulse, c.offset
        );
    }
    if let Some(m) = &s.metrics {
        let _ = writeln!(t, "rho law error {:.3e}", m.max_rho_law_error);
        let _ = writeln!(t, "Drho law err  {:.3e}", m.max_drho_law_error);
        if let Some(e) = m.terminal_orbit_error {
            let _ = writeln!(t, "orbit error   {e:.3e}");
        }
        if let Some(k) = m.last_correction_k {
            let _ = writeln!(
                t,
                "corrections   {} (last at k={k})",
                m.corrections_applied
            );
        }
    }
    t
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub omega_star: f64,
    /// `None` when no orbit exists for this rate.
    pub orbit: Option<SweepOrbit>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SweepOrbit {
    pub omega_even: f64,
    pub delta_odd: f64,
    pub delta_even: f64,
    pub impulse_odd: f64,
    pub impulse_even: f64,
    pub r_star: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalyzeReport {
    pub scenario: String,
    pub symmetric: bool,
    pub delta_theta: f64,
    pub growth_factor: f64,
    pub symmetric_omega_star: Option<f64>,
    pub sweep: Vec<SweepRow>,
}

/// Zero-dynamics digest and a sweep of 2-periodic orbits.
pub fn analyze(sc: &Scenario, extra: &[f64]) -> AnalyzeReport {
    let p = &sc.params;
    let spec = &sc.spec;
    let mut rates: Vec<f64> = sc.sweep.clone();
    rates.extend_from_slice(extra);
    let sweep = rates
        .into_iter()
        .map(|w| match design_orbit(spec, w, p) {
            Ok(o) => match orbit_inputs(&o, p) {
                Ok((_, r)) => SweepRow {
                    omega_star: w,
                    orbit: Some(SweepOrbit {
                        omega_even: o.omega_even,
                        delta_odd: o.delta_odd,
                        delta_even: o.delta_even,
                        impulse_odd: o.impulse_at(ImpulseIndex::FIRST),
                        impulse_even: o.impulse_at(ImpulseIndex::FIRST.next()),
                        r_star: r,
                    }),
                    note: None,
                },
                Err(e) => SweepRow {
                    omega_star: w,
                    orbit: None,
                    note: Some(e.to_string()),
                },
            },
            Err(e) => SweepRow {
                omega_star: w,
                orbit: None,
                note: Some(e.to_string()),
            },
        })
        .collect();
    AnalyzeReport {
        scenario: sc.name.clone(),
        symmetric: spec.is_symmetric(),
        delta_theta: spec.delta_theta_star(),
        growth_factor: growth_factor(spec),
        symmetric_omega_star: symmetric_omega_star(spec, p).ok(),
        sweep,
    }
}

pub fn format_analyze(r: &AnalyzeReport) -> String {
    let mut t = String::new();
    let _ = writeln!(t, "scenario        {}", r.scenario);
    let _ = writeln!(t, "symmetric       {}", r.symmetric);
    let _ = writeln!(t, "delta_theta     {:.6}", r.delta_theta);
    let _ = writeln!(t, "growth factor   {:.6}", r.growth_factor);
    match r.symmetric_omega_star {
        Some(w) => {
            let _ = writeln!(t, "symmetric omega {w:.6}");
        }
        None => {
            let _ = writeln!(t, "symmetric omega none");
        }
    }
    if r.sweep.is_empty() {
        return t;
    }
    let _ = writeln!(
        t,
        "\n{:>10} {:>10} {:>9} {:>9} {:>9} {:>9}",
        "omega*", "omega_even", "delta_odd", "delta_ev", "I_odd", "r*"
    );
    for row in &r.sweep {
        match &row.orbit {
            Some(o) => {
                let _ = writeln!(
                    t,
                    "{:>10.4} {:>10.4} {:>9.4} {:>9.4} {:>9.4} {:>9.4}",
                    row.omega_star, o.omega_even, o.delta_odd, o.delta_even, o.impulse_odd, o.r_star
                );
            }
            None => {
                let _ = writeln!(
                    t,
                    "{:>10.4} no orbit: {}",
                    row.omega_star,
                    row.note.as_deref().unwrap_or("")
                );
            }
        }
    }
    t
}

#[derive(Debug, Clone, Serialize)]
pub struct LinearizeReport {
    pub scenario: String,
    pub omega_star: f64,
    pub z_star: Vec<f64>,
    pub u_star: [f64; 2],
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub controllability_rank: usize,
    pub controllable: bool,
    pub open_loop_spectral_radius: f64,
    /// `u = K (z - z*)`.
    pub k: Vec<Vec<f64>>,
    pub closed_loop_eigenvalues: Vec<[f64; 2]>,
    pub closed_loop_spectral_radius: f64,
    pub riccati_iterations: usize,
}

pub fn linearize_report(sc: &Scenario) -> anyhow::Result<LinearizeReport> {
    let orbit = sc.target_orbit().context("designing target orbit")?;
    let stab = Stabilizer::synthesize(&orbit, &sc.params, &sc.design())
        .context("synthesizing orbit stabilizer")?;
    let (rank, controllable) = controllability(&stab.lin.a, &stab.lin.b)?;
    let closed = &stab.lin.a + &stab.lin.b * &stab.gain.k;
    let mut eig: Vec<[f64; 2]> = closed
        .complex_eigenvalues()
        .iter()
        .map(|c| [c.re, c.im])
        .collect();
    eig.sort_by(|x, y| {
        let mx = x[0].hypot(x[1]);
        let my = y[0].hypot(y[1]);
        my.total_cmp(&mx).then(x[1].total_cmp(&y[1]))
    });
    Ok(LinearizeReport {
        scenario: sc.name.clone(),
        omega_star: orbit.omega_star,
        z_star: stab.lin.z_star.z.iter().copied().collect(),
        u_star: [stab.lin.u_star.x, stab.lin.u_star.y],
        a: rows(&stab.lin.a),
        b: rows(&stab.lin.b),
        controllability_rank: rank,
        controllable,
        open_loop_spectral_radius: spectral_radius(&stab.lin.a),
        k: rows(&stab.gain.k),
        closed_loop_eigenvalues: eig,
        closed_loop_spectral_radius: stab.lqr.spectral_radius,
        riccati_iterations: stab.lqr.iterations,
    })
}

fn write_matrix(t: &mut String, name: &str, m: &[Vec<f64>]) {
    let _ = writeln!(t, "{name} =");
    for row in m {
        let cells: Vec<String> = row.iter().map(|x| format!("{x:>10.4}")).collect();
        let _ = writeln!(t, "  [{} ]", cells.join(""));
    }
}

pub fn format_linearize(r: &LinearizeReport) -> String {
    let mut t = String::new();
    let _ = writeln!(t, "scenario  {}", r.scenario);
    let _ = writeln!(t, "omega*    {:.6}", r.omega_star);
    let z: Vec<String> = r.z_star.iter().map(|x| format!("{x:.4}")).collect();
    let _ = writeln!(t, "z*        [{}]", z.join(", "));
    let _ = writeln!(t, "I*, r*    {:.4}, {:.4}", r.u_star[0], r.u_star[1]);
    write_matrix(&mut t, "A", &r.a);
    write_matrix(&mut t, "B", &r.b);
    let _ = writeln!(
        t,
        "rank [B AB ... A^4 B] = {} ({})",
        r.controllability_rank,
        if r.controllable { "controllable" } else { "not controllable" }
    );
    let _ = writeln!(t, "open-loop spectral radius {:.4}", r.open_loop_spectral_radius);
    write_matrix(&mut t, "K", &r.k);
    let _ = writeln!(t, "sign convention: u = K (z - z*), closed loop A + B K");
    let _ = writeln!(t, "closed-loop eigenvalues");
    for [re, im] in &r.closed_loop_eigenvalues {
        let _ = writeln!(t, "  {re:>9.5} {im:+.5}i   |{:.5}|", re.hypot(*im));
    }
    let _ = writeln!(
        t,
        "closed-loop spectral radius {:.5} ({} Riccati iterations)",
        r.closed_loop_spectral_radius, r.riccati_iterations
    );
    t
}

enum CsvKind {
    Impulses,
    Trajectory,
}

fn sniff(path: &Path, text: &str) -> anyhow::Result<CsvKind> {
    let header: Vec<&str> = text.lines().next().unwrap_or("").split(',').collect();
    if header == IMPULSE_HEADER {
        Ok(CsvKind::Impulses)
    } else if header == TRAJECTORY_HEADER {
        Ok(CsvKind::Trajectory)
    } else {
        bail!("{}: not an impulse or trajectory CSV", path.display())
    }
}

/// Renders each CSV to an SVG next to it (or into `out` when given).
/// Returns the written paths.
pub fn plot(inputs: &[PathBuf], out: Option<&Path>) -> anyhow::Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for path in inputs {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let svg = match sniff(path, &text)? {
            CsvKind::Impulses => impulse_figure(&read_impulses(text.as_bytes())?),
            CsvKind::Trajectory => trajectory_figure(&read_trajectory(text.as_bytes())?),
        }
        .with_context(|| format!("plotting {}", path.display()))?;
        let target = match out {
            Some(dir) => {
                fs::create_dir_all(dir)?;
                dir.join(path.with_extension("svg").file_name().unwrap_or_default())
            }
            None => path.with_extension("svg"),
        };
        write_text(&target, svg.as_bytes())?;
        written.push(target);
    }
    Ok(written)
}

/// Applies `f` to every item on up to `jobs` threads, keeping input order.
pub fn run_parallel<T, R, F>(items: &[T], jobs: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let jobs = jobs.max(1).min(items.len().max(1));
    if jobs == 1 {
        return items.iter().map(&f).collect();
    }
    let chunk = items.len().div_ceil(jobs);
    std::thread::scope(|s| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|c| s.spawn(|| c.iter().map(&f).collect::<Vec<R>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker panicked"))
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli::scenario::{parse_scenario, SIM_ORBIT, SIM_VHC};

    #[test]
    fn parallel_keeps_order() {
        let xs: Vec<u32> = (0..37).collect();
        let ys = run_parallel(&xs, 4, |x| x * 2);
        assert_eq!(ys, xs.iter().map(|x| x * 2).collect::<Vec<_>>());
        assert!(run_parallel(&Vec::<u32>::new(), 3, |x| *x).is_empty());
    }

    #[test]
    fn analyze_reports_symmetric_orbit() {
        let sc = parse_scenario(SIM_VHC, None).unwrap();
        let r = analyze(&sc, &[1.0]);
        assert!(r.symmetric);
        assert!((r.growth_factor - 1.0).abs() < 1e-12);
        assert!((r.symmetric_omega_star.unwrap() + 4.188876).abs() < 1e-5);
        assert_eq!(r.sweep.len(), 4);
        let sym = r.sweep[2].orbit.unwrap();
        assert!((sym.delta_odd - 0.5).abs() < 1e-4);
        assert!(r.sweep[3].orbit.is_none());
        assert!(format_analyze(&r).contains("no orbit"));
    }

    #[test]
    fn asymmetric_spec_has_no_orbit() {
        let text = SIM_VHC.replace(
            "theta_odd_rad = 0.5235987755982988",
            "theta_odd_rad = 0.5235987755982988\ntheta_even_rad = 2.4",
        );
        let sc = parse_scenario(&text, None).unwrap();
        let r = analyze(&sc, &[]);
        assert!(!r.symmetric);
        assert!(r.symmetric_omega_star.is_none());
        assert!(r.sweep.iter().all(|row| row.orbit.is_none()));
    }

    #[test]
    fn linearize_report_is_stabilizing() {
        let sc = parse_scenario(SIM_ORBIT, None).unwrap();
        let r = linearize_report(&sc).unwrap();
        assert_eq!(r.controllability_rank, 5);
        assert!(r.closed_loop_spectral_radius < 1.0);
        assert!(format_linearize(&r).contains("u = K (z - z*)"));
    }
}
