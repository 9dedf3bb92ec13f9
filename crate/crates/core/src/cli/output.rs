//! CSV and JSON artifacts written by `simulate`.

use std::io::{Read, Write};
use std::path::Path;

use anyhow::Context;
use serde::{Deserialize, Serialize};

use crate::harness::{EpisodeLog, Metrics, StepRecord, TrajectoryPoint};

pub const IMPULSE_HEADER: [&str; 12] = [
    "k", "theta", "omega", "rho_x", "rho_y", "drho_x", "drho_y", "delta", "I", "r", "u_I", "u_r",
];
pub const TRAJECTORY_HEADER: [&str; 4] = ["t", "hx", "hy", "theta"];

/// 17 significant digits, enough to round-trip any f64.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImpulseRow {
    pub k: u32,
    pub theta: f64,
    pub omega: f64,
    pub rho_x: f64,
    pub rho_y: f64,
    pub drho_x: f64,
    pub drho_y: f64,
    pub delta: f64,
    #[serde(rename = "I")]
    pub impulse: f64,
    #[serde(rename = "r")]
    pub offset: f64,
    #[serde(rename = "u_I")]
    pub u_impulse: f64,
    #[serde(rename = "u_r")]
    pub u_offset: f64,
}

impl From<&StepRecord> for ImpulseRow {
    fn from(r: &StepRecord) -> Self {
        let u = r.u.unwrap_or_default();
        Self {
            k: r.k,
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
        }
    }
}

pub fn write_impulses<W: Write>(out: W, records: &[StepRecord]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(IMPULSE_HEADER)?;
    for r in records {
        let row = ImpulseRow::from(r);
        let mut fields = vec![row.k.to_string()];
        fields.extend(
            [
                row.theta,
                row.omega,
                row.rho_x,
                row.rho_y,
                row.drho_x,
                row.drho_y,
                row.delta,
                row.impulse,
                row.offset,
                row.u_impulse,
                row.u_offset,
            ]
            .map(fmt17),
        );
        w.write_record(&fields)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trajectory<W: Write>(out: W, points: &[TrajectoryPoint]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRAJECTORY_HEADER)?;
    for p in points {
        w.write_record([p.t, p.hx, p.hy, p.theta].map(fmt17))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_impulses<R: Read>(input: R) -> anyhow::Result<Vec<ImpulseRow>> {
    let mut r = csv::Reader::from_reader(input);
    let rows = r
        .deserialize()
        .collect::<Result<Vec<ImpulseRow>, _>>()
        .context("parsing impulse CSV")?;
    Ok(rows)
}

pub fn read_trajectory<R: Read>(input: R) -> anyhow::Result<Vec<TrajectoryPoint>> {
    let mut r = csv::Reader::from_reader(input);
    let rows = r
        .deserialize()
        .collect::<Result<Vec<TrajectoryPoint>, _>>()
        .context("parsing trajectory CSV")?;
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleValues {
    pub k: u32,
    pub omega: f64,
    pub delta: f64,
    pub impulse: f64,
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilizerSummary {
    pub omega_star: f64,
    pub z_star: Vec<f64>,
    pub i_star: f64,
    pub r_star: f64,
    pub gain: Vec<Vec<f64>>,
    pub controllability_rank: usize,
    pub closed_loop_spectral_radius: f64,
    pub deadband: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub scenario: String,
    pub completed: bool,
    pub termination: String,
    pub impulse_count: usize,
    pub elapsed_s: f64,
    pub last_odd: Option<CycleValues>,
    pub last_even: Option<CycleValues>,
    pub metrics: Option<Metrics>,
    pub stabilizer: Option<StabilizerSummary>,
    pub wall_clock_s: f64,
}

fn cycle(r: &StepRecord) -> CycleValues {
    CycleValues {
        k: r.k,
        omega: r.omega,
        delta: r.delta,
        impulse: r.impulse,
        offset: r.offset,
    }
}

pub fn summarize(
    name: &str,
    log: &EpisodeLog,
    stabilizer: Option<StabilizerSummary>,
) -> Summary {
    let last = |odd: bool| {
        log.records
            .iter()
            .rev()
            .find(|r| (r.k % 2 == 1) == odd)
            .map(cycle)
    };
    Summary {
        scenario: name.to_string(),
        completed: log.termination.is_completed(),
        termination: log.termination.describe(),
        impulse_count: log.records.len(),
        elapsed_s: log.elapsed(),
        last_odd: last(true),
        last_even: last(false),
        metrics: crate::harness::metrics(log).ok(),
        stabilizer,
        wall_clock_s: log.wall_clock.as_secs_f64(),
    }
}

pub fn write_text(path: &Path, contents: &[u8]) -> anyhow::Result<()> {
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}
