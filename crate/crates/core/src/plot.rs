//! SVG rendering of traces: one column per trace with the arena snapshot on
//! top and the evader-pursuer distance below.

use std::fmt::Write as _;

use crate::config::EnvironmentConfig;
use crate::sim::Trace;

const COL_W: f64 = 420.0;
const ARENA_H: f64 = 420.0;
const DIST_H: f64 = 220.0;
const MARGIN: f64 = 40.0;
/// Polylines are thinned to at most this many vertices.
const MAX_POINTS: usize = 2000;

fn thin<T: Copy>(v: &[T]) -> Vec<T> {
    if v.len() <= MAX_POINTS {
        return v.to_vec();
    }
    let stride = v.len().div_ceil(MAX_POINTS);
    let mut out: Vec<T> = v.iter().step_by(stride).copied().collect();
    out.push(*v.last().expect("nonempty"));
    out
}

fn polyline(out: &mut String, class: &str, pts: &[(f64, f64)]) {
    let _ = write!(out, "<polyline class=\"{class}\" fill=\"none\" points=\"");
    for (k, (x, y)) in pts.iter().enumerate() {
        if k > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{x:.2},{y:.2}");
    }
    out.push_str("\"/>\n");
}

/// Outline of the part of the target disc outside the arena circle.
fn crescent(cfg: &EnvironmentConfig) -> Vec<(f64, f64)> {
    let n = 180;
    let mut outer = Vec::new();
    for k in 0..=n {
        let th = std::f64::consts::TAU * k as f64 / n as f64;
        let p = (cfg.x_r[0] + cfg.r_r * th.cos(), cfg.x_r[1] + cfg.r_r * th.sin());
        if p.0.hypot(p.1) >= cfg.r {
            outer.push((th, p));
        }
    }
    if outer.is_empty() {
        return Vec::new();
    }
    // Rotate so the run of outside points is contiguous.
    if let Some(gap) = outer.windows(2).position(|w| w[1].0 - w[0].0 > 1.5 * std::f64::consts::TAU / n as f64) {
        outer.rotate_left(gap + 1);
    }
    let mut pts: Vec<(f64, f64)> = outer.iter().map(|(_, p)| *p).collect();
    // Close along the arena circle between the two ends.
    let a0 = pts.last().map(|p| p.1.atan2(p.0)).unwrap_or(0.0);
    let a1 = pts[0].1.atan2(pts[0].0);
    let mut d = a1 - a0;
    while d > std::f64::consts::PI {
        d -= std::f64::consts::TAU;
    }
    while d < -std::f64::consts::PI {
        d += std::f64::consts::TAU;
    }
    for k in 1..20 {
        let a = a0 + d * k as f64 / 20.0;
        pts.push((cfg.r * a.cos(), cfg.r * a.sin()));
    }
    pts
}

/// Renders `traces` (label, trace) side by side.
pub fn render_svg(traces: &[(String, Trace)], cfg: &EnvironmentConfig) -> String {
    let width = COL_W * traces.len().max(1) as f64;
    let height = ARENA_H + DIST_H;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">"
    );
    out.push_str(
        "<style>.arena{stroke:#000;fill:none}.target{fill:#6c6;stroke:#393}.evader{stroke:#1f5fbf;stroke-width:1.5}\
.pursuer{stroke:#c0392b;stroke-width:1.5}.catch{fill:#c0392b;fill-opacity:0.25;stroke:#c0392b}\
.dist{stroke:#000;stroke-width:1.2}.capture-line{stroke:#d00;stroke-dasharray:6,4}.axis{stroke:#444}\
text{font-family:sans-serif;font-size:12px}</style>\n",
    );
    let half = cfg.r + cfg.r_r + 0.3;
    let scale = (COL_W - 2.0 * MARGIN) / (2.0 * half);
    for (col, (label, trace)) in traces.iter().enumerate() {
        let ox = col as f64 * COL_W;
        let cx = ox + COL_W / 2.0;
        let cy = ARENA_H / 2.0;
        let map = |p: (f64, f64)| (cx + scale * p.0, cy - scale * p.1);
        let _ = writeln!(out, "<g class=\"panel\" id=\"panel-{col}\">");
        let _ = writeln!(out, "<text x=\"{:.2}\" y=\"16\">{}</text>", ox + MARGIN, xml_escape(label));
        let _ = writeln!(
            out,
            "<circle class=\"arena\" cx=\"{cx:.2}\" cy=\"{cy:.2}\" r=\"{:.2}\"/>",
            scale * cfg.r
        );
        let cres: Vec<(f64, f64)> = crescent(cfg).into_iter().map(map).collect();
        if !cres.is_empty() {
            let mut d = String::new();
            for (k, (x, y)) in cres.iter().enumerate() {
                let _ = write!(d, "{}{x:.2},{y:.2} ", if k == 0 { "M" } else { "L" });
            }
            let _ = writeln!(out, "<path class=\"target\" d=\"{}Z\"/>", d);
        }
        let ev: Vec<(f64, f64)> = trace.rows.iter().map(|r| map((r.x[0], r.x[1]))).collect();
        let pu: Vec<(f64, f64)> = trace.rows.iter().map(|r| map((r.x[2], r.x[3]))).collect();
        polyline(&mut out, "evader", &thin(&ev));
        polyline(&mut out, "pursuer", &thin(&pu));
        if let Some(last) = trace.rows.last() {
            let (px, py) = map((last.x[2], last.x[3]));
            let _ = writeln!(
                out,
                "<circle class=\"catch\" cx=\"{px:.2}\" cy=\"{py:.2}\" r=\"{:.2}\"/>",
                scale * cfg.r_a
            );
        }

        // Distance panel.
        let top = ARENA_H + 10.0;
        let bottom = ARENA_H + DIST_H - 30.0;
        let left = ox + MARGIN;
        let right = ox + COL_W - MARGIN / 2.0;
        let t_end = trace.rows.last().map_or(1.0, |r| r.t).max(1e-9);
        let d_max = trace
            .rows
            .iter()
            .map(|r| r.dist)
            .fold(cfg.r_a, f64::max)
            * 1.1;
        let dmap = |t: f64, d: f64| (left + (right - left) * t / t_end, bottom - (bottom - top) * d / d_max);
        let _ = writeln!(
            out,
            "<line class=\"axis\" x1=\"{left:.2}\" y1=\"{bottom:.2}\" x2=\"{right:.2}\" y2=\"{bottom:.2}\"/>"
        );
        let _ = writeln!(
            out,
            "<line class=\"axis\" x1=\"{left:.2}\" y1=\"{top:.2}\" x2=\"{left:.2}\" y2=\"{bottom:.2}\"/>"
        );
        let dist: Vec<(f64, f64)> = trace.rows.iter().map(|r| dmap(r.t, r.dist)).collect();
        polyline(&mut out, "dist", &thin(&dist));
        let (_, ya) = dmap(0.0, cfg.r_a);
        let _ = writeln!(
            out,
            "<line class=\"capture-line\" x1=\"{left:.2}\" y1=\"{ya:.2}\" x2=\"{right:.2}\" y2=\"{ya:.2}\"/>"
        );
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\">t (outcome: {})</text>",
            (left + right) / 2.0 - 40.0,
            bottom + 20.0,
            trace.outcome
        );
        let _ = writeln!(out, "<text x=\"{:.2}\" y=\"{:.2}\">dist</text>", left + 4.0, top + 12.0);
        out.push_str("</g>\n");
    }
    out.push_str("</svg>\n");
    out
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}
