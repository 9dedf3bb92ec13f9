//! Minimal deterministic SVG line plots.

use std::fmt::Write as _;

use anyhow::bail;

use super::output::ImpulseRow;
use crate::harness::TrajectoryPoint;

const PANEL_W: f64 = 360.0;
const PANEL_H: f64 = 200.0;
const MARGIN_L: f64 = 64.0;
const MARGIN_R: f64 = 16.0;
const MARGIN_T: f64 = 28.0;
const MARGIN_B: f64 = 40.0;

struct Panel<'a> {
    title: &'a str,
    x_label: &'a str,
    y_label: &'a str,
    x: Vec<f64>,
    y: Vec<f64>,
    markers: bool,
    equal_aspect: bool,
}

fn nice_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let nice = if norm < 1.5 {
        1.0
    } else if norm < 3.0 {
        2.0
    } else if norm < 7.0 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn range(v: &[f64]) -> (f64, f64) {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if (hi - lo).abs() < 1e-12 * (1.0 + lo.abs()) {
        let pad = if lo == 0.0 { 1.0 } else { 0.1 * lo.abs() };
        (lo - pad, hi + pad)
    } else {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    }
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let step = nice_step(hi - lo);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn tick_label(v: f64, step: f64) -> String {
    let decimals = (-step.log10().floor()).max(0.0) as usize;
    let s = format!("{v:.decimals$}");
    if s.starts_with("-") && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

fn draw_panel(svg: &mut String, panel: &Panel, ox: f64, oy: f64) {
    let pw = PANEL_W - MARGIN_L - MARGIN_R;
    let ph = PANEL_H - MARGIN_T - MARGIN_B;
    let (mut x0, mut x1) = range(&panel.x);
    let (mut y0, mut y1) = range(&panel.y);
    if panel.equal_aspect {
        let sx = (x1 - x0) / pw;
        let sy = (y1 - y0) / ph;
        let s = sx.max(sy);
        let (cx, cy) = (0.5 * (x0 + x1), 0.5 * (y0 + y1));
        x0 = cx - 0.5 * s * pw;
        x1 = cx + 0.5 * s * pw;
        y0 = cy - 0.5 * s * ph;
        y1 = cy + 0.5 * s * ph;
    }
    let px = |x: f64| ox + MARGIN_L + (x - x0) / (x1 - x0) * pw;
    let py = |y: f64| oy + MARGIN_T + ph - (y - y0) / (y1 - y0) * ph;

    let _ = writeln!(
        svg,
        r##"<rect x="{:.2}" y="{:.2}" width="{pw:.2}" height="{ph:.2}" fill="none" stroke="#444" stroke-width="1"/>"##,
        ox + MARGIN_L,
        oy + MARGIN_T
    );
    let xstep = nice_step(x1 - x0);
    for t in ticks(x0, x1) {
        let x = px(t);
        let _ = writeln!(
            svg,
            r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#ddd"/><text x="{x:.2}" y="{:.2}" font-size="10" text-anchor="middle">{}</text>"##,
            oy + MARGIN_T,
            oy + MARGIN_T + ph,
            oy + MARGIN_T + ph + 14.0,
            tick_label(t, xstep)
        );
    }
    let ystep = nice_step(y1 - y0);
    for t in ticks(y0, y1) {
        let y = py(t);
        let _ = writeln!(
            svg,
            r##"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" font-size="10" text-anchor="end">{}</text>"##,
            ox + MARGIN_L,
            ox + MARGIN_L + pw,
            ox + MARGIN_L - 4.0,
            y + 3.0,
            tick_label(t, ystep)
        );
    }
    let mut path = String::new();
    for (i, (x, y)) in panel.x.iter().zip(&panel.y).enumerate() {
        let _ = write!(
            path,
            "{}{:.2},{:.2}",
            if i == 0 { "M" } else { " L" },
            px(*x),
            py(*y)
        );
    }
    let _ = writeln!(
        svg,
        r##"<path d="{path}" fill="none" stroke="#1f5fa8" stroke-width="1.5"/>"##
    );
    if panel.markers {
        for (x, y) in panel.x.iter().zip(&panel.y) {
            let _ = writeln!(
                svg,
                r##"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="#1f5fa8"/>"##,
                px(*x),
                py(*y)
            );
        }
    }
    let _ = writeln!(
        svg,
        r##"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle" font-weight="bold">{}</text>"##,
        ox + MARGIN_L + 0.5 * pw,
        oy + 18.0,
        panel.title
    );
    let _ = writeln!(
        svg,
        r##"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="middle">{}</text>"##,
        ox + MARGIN_L + 0.5 * pw,
        oy + PANEL_H - 6.0,
        panel.x_label
    );
    let _ = writeln!(
        svg,
        r##"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="middle" transform="rotate(-90 {:.2} {:.2})">{}</text>"##,
        ox + 14.0,
        oy + MARGIN_T + 0.5 * ph,
        ox + 14.0,
        oy + MARGIN_T + 0.5 * ph,
        panel.y_label
    );
}

fn figure(panels: &[Panel], cols: usize) -> String {
    let rows = panels.len().div_ceil(cols);
    let w = PANEL_W * cols as f64;
    let h = PANEL_H * rows as f64;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}" font-family="sans-serif">"##
    );
    let _ = writeln!(svg, r##"<rect width="100%" height="100%" fill="white"/>"##);
    for (i, p) in panels.iter().enumerate() {
        let ox = (i % cols) as f64 * PANEL_W;
        let oy = (i / cols) as f64 * PANEL_H;
        draw_panel(&mut svg, p, ox, oy);
    }
    svg.push_str("</svg>\n");
    svg
}

type Series = (&'static str, &'static str, fn(&ImpulseRow) -> f64);

/// Eight panels against `k`: both residual components, both velocity
/// residual components, angular rate, flight time, impulse and offset.
pub fn impulse_figure(rows: &[ImpulseRow]) -> anyhow::Result<String> {
    if rows.is_empty() {
        bail!("impulse CSV has no rows");
    }
    let k: Vec<f64> = rows.iter().map(|r| r.k as f64).collect();
    let series: [Series; 8] = [
        ("(a) rho_x", "rho_x (m)", |r| r.rho_x),
        ("(b) rho_y", "rho_y (m)", |r| r.rho_y),
        ("(c) Drho_x", "Drho_x (m/s)", |r| r.drho_x),
        ("(d) Drho_y", "Drho_y (m/s)", |r| r.drho_y),
        ("(e) omega_k", "omega_k (rad/s)", |r| r.omega),
        ("(f) delta_k", "delta_k (s)", |r| r.delta),
        ("(g) I_k", "I_k (Ns)", |r| r.impulse),
        ("(h) r_k", "r_k (m)", |r| r.offset),
    ];
    let panels: Vec<Panel> = series
        .iter()
        .map(|(title, label, f)| Panel {
            title,
            x_label: "k",
            y_label: label,
            x: k.clone(),
            y: rows.iter().map(f).collect(),
            markers: true,
            equal_aspect: false,
        })
        .collect();
    Ok(figure(&panels, 2))
}

/// Center-of-mass path in the plane.
pub fn trajectory_figure(points: &[TrajectoryPoint]) -> anyhow::Result<String> {
    if points.is_empty() {
        bail!("trajectory CSV has no rows");
    }
    let panel = Panel {
        title: "center of mass",
        x_label: "h_x (m)",
        y_label: "h_y (m)",
        x: points.iter().map(|p| p.hx).collect(),
        y: points.iter().map(|p| p.hy).collect(),
        markers: false,
        equal_aspect: true,
    };
    Ok(figure(&[panel], 1))
}
