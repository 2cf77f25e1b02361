//! SVG plots of a report: complement map, orbits, and projections of space curves.

use std::fmt::Write as _;
use std::str::FromStr;

use thiserror::Error;

use crate::curve::{CurveSet, PeriodicCurve};
use crate::planar::analyze_complement;
use crate::report::{OrbitRun, ScenarioReport};

/// Map plots recompute the complement at most at this resolution.
pub const MAP_RESOLUTION: usize = 256;
const PANEL: f64 = 480.0;
const MARGIN: f64 = 20.0;
const CURVE_SAMPLES: usize = 1024;

const PALETTE: [&str; 8] = ["#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#76b7b2", "#edc948", "#b07aa1", "#9c755f"];
const ORBIT_COLOR: &str = "#d62728";

#[derive(Debug, Error)]
pub enum PlotError {
    #[error("report has no {0} output")]
    Missing(&'static str),
    #[error("{kind} plots need a {needed} scenario")]
    WrongDimension { kind: PlotKind, needed: &'static str },
    #[error("unknown plot kind {0:?}, expected map, orbits or projections")]
    UnknownKind(String),
    #[error("{0}")]
    Curve(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlotKind {
    Map,
    Orbits,
    Projections,
}

impl std::fmt::Display for PlotKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PlotKind::Map => "map",
            PlotKind::Orbits => "orbits",
            PlotKind::Projections => "projections",
        })
    }
}

impl FromStr for PlotKind {
    type Err = PlotError;

    fn from_str(s: &str) -> Result<Self, PlotError> {
        match s {
            "map" => Ok(PlotKind::Map),
            "orbits" => Ok(PlotKind::Orbits),
            "projections" => Ok(PlotKind::Projections),
            other => Err(PlotError::UnknownKind(other.to_string())),
        }
    }
}

pub fn winding_color(w: i64) -> &'static str {
    PALETTE[w.rem_euclid(PALETTE.len() as i64) as usize]
}

/// Maps a world box onto a square panel, y up.
struct Frame {
    x0: f64,
    y0: f64,
    lo: [f64; 2],
    scale: f64,
}

impl Frame {
    fn new(x0: f64, y0: f64, lo: [f64; 2], hi: [f64; 2]) -> Self {
        let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-12);
        Self { x0, y0, lo, scale: PANEL / span }
    }

    fn around(x0: f64, y0: f64, pts: &[[f64; 2]]) -> Self {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in pts {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        if !lo[0].is_finite() {
            return Self::new(x0, y0, [-1.0, -1.0], [1.0, 1.0]);
        }
        let pad = 0.08 * (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-9);
        let c = [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0];
        let half = (hi[0] - lo[0]).max(hi[1] - lo[1]) / 2.0 + pad;
        Self::new(x0, y0, [c[0] - half, c[1] - half], [c[0] + half, c[1] + half])
    }

    fn px(&self, p: [f64; 2]) -> (f64, f64) {
        (self.x0 + (p[0] - self.lo[0]) * self.scale, self.y0 + PANEL - (p[1] - self.lo[1]) * self.scale)
    }
}

struct Svg {
    body: String,
    width: f64,
    height: f64,
}

impl Svg {
    fn new(width: f64, height: f64) -> Self {
        Self { body: String::new(), width, height }
    }

    fn polyline(&mut self, frame: &Frame, pts: &[[f64; 2]], color: &str, width: f64, closed: bool) {
        if pts.is_empty() {
            return;
        }
        let mut d = String::new();
        for (i, p) in pts.iter().enumerate() {
            let (x, y) = frame.px(*p);
            let _ = write!(d, "{}{x:.2},{y:.2}", if i == 0 { "M" } else { " L" });
        }
        if closed {
            d.push_str(" Z");
        }
        let _ = writeln!(
            self.body,
            r#"<path d="{d}" fill="none" stroke="{color}" stroke-width="{width}" stroke-linejoin="round"/>"#
        );
    }

    fn dot(&mut self, frame: &Frame, p: [f64; 2], r: f64, color: &str) {
        let (x, y) = frame.px(p);
        let _ = writeln!(self.body, r#"<circle cx="{x:.2}" cy="{y:.2}" r="{r}" fill="{color}" stroke="black" stroke-width="0.5"/>"#);
    }

    fn text(&mut self, x: f64, y: f64, s: &str) {
        let _ = writeln!(self.body, r#"<text x="{x:.1}" y="{y:.1}" font-family="sans-serif" font-size="12">{}</text>"#, escape(s));
    }

    fn frame_box(&mut self, frame: &Frame) {
        let _ = writeln!(
            self.body,
            r#"<rect x="{:.1}" y="{:.1}" width="{PANEL}" height="{PANEL}" fill="none" stroke="gray" stroke-width="0.5"/>"#,
            frame.x0, frame.y0
        );
    }

    fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n{}</svg>\n",
            self.body,
            w = self.width,
            h = self.height
        )
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn project(curve: &PeriodicCurve, samples: usize, axes: (usize, usize)) -> Vec<[f64; 2]> {
    let n = curve.dimension();
    curve.sample(samples, 0).chunks(n).map(|p| [p[axes.0], p[axes.1]]).collect()
}

fn curves_of(report: &ScenarioReport) -> Result<CurveSet, PlotError> {
    report.scenario.curve.build().map_err(|e| PlotError::Curve(e.to_string()))
}

fn orbit_runs(report: &ScenarioReport) -> Vec<&OrbitRun> {
    let mut runs: Vec<&OrbitRun> = Vec::new();
    if let Some(o) = &report.orbits {
        runs.extend(&o.runs);
    }
    if let Some(n) = &report.nbody {
        runs.extend(&n.runs);
    }
    runs
}

/// Renders one plot of a report as an SVG document.
pub fn plot(report: &ScenarioReport, kind: PlotKind) -> Result<String, PlotError> {
    match kind {
        PlotKind::Map => map(report),
        PlotKind::Orbits => orbits(report),
        PlotKind::Projections => projections(report),
    }
}

fn map(report: &ScenarioReport) -> Result<String, PlotError> {
    let set = curves_of(report)?;
    if set.dimension() != 2 || set.component_count() != 1 {
        return Err(PlotError::WrongDimension { kind: PlotKind::Map, needed: "planar single-curve" });
    }
    let summary = &report.analyze2d.as_ref().ok_or(PlotError::Missing("analyze2d"))?.summary;
    let curve = &set.curves()[0];
    let res = report.scenario.solver.resolution.min(MAP_RESOLUTION);
    let cmap = analyze_complement(curve, res).map_err(|e| PlotError::Curve(e.to_string()))?;
    let frame = Frame::new(MARGIN, MARGIN, cmap.lo, cmap.hi);
    let mut svg = Svg::new(PANEL + 2.0 * MARGIN + 160.0, PANEL + 2.0 * MARGIN);
    let cell = cmap.cell_size() * frame.scale;
    // one rectangle per run of equal labels along x
    for j in 0..res {
        let mut i = 0;
        while i < res {
            let label = cmap.label(i, j);
            let start = i;
            while i < res && cmap.label(i, j) == label {
                i += 1;
            }
            let Some(info) = usize::try_from(label).ok().and_then(|l| cmap.components.get(l)) else { continue };
            if !info.bounded {
                continue;
            }
            let c = cmap.cell_center(start, j);
            let (x, y) = frame.px([c[0] - cmap.cell_size() / 2.0, c[1] + cmap.cell_size() / 2.0]);
            let _ = writeln!(
                svg.body,
                r#"<rect x="{x:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="{}" fill-opacity="0.55"/>"#,
                cell * (i - start) as f64 + 0.3,
                cell + 0.3,
                winding_color(info.winding)
            );
        }
    }
    svg.frame_box(&frame);
    svg.polyline(&frame, &project(curve, CURVE_SAMPLES, (0, 1)), "black", 1.5, true);
    for run in orbit_runs(report) {
        for rec in &run.orbits {
            svg.polyline(&frame, &project(&rec.orbit.z, 512, (0, 1)), ORBIT_COLOR, 1.0, true);
        }
    }
    let lx = PANEL + 2.0 * MARGIN;
    svg.text(lx, MARGIN + 12.0, &format!("r = {}, s = {}", summary.r, summary.s));
    let mut windings = summary.windings.clone();
    windings.sort_by(|a, b| b.cmp(a));
    windings.dedup();
    for (k, w) in windings.iter().enumerate() {
        let y = MARGIN + 32.0 + 20.0 * k as f64;
        let count = summary.windings.iter().filter(|v| *v == w).count();
        let _ = writeln!(
            svg.body,
            r#"<rect x="{lx}" y="{:.1}" width="14" height="14" fill="{}" fill-opacity="0.55"/>"#,
            y - 11.0,
            winding_color(*w)
        );
        svg.text(lx + 20.0, y, &format!("winding {w} ({count})"));
    }
    let n_orbits: usize = orbit_runs(report).iter().map(|r| r.orbits.len()).sum();
    if n_orbits > 0 {
        let y = MARGIN + 40.0 + 20.0 * windings.len() as f64;
        let _ = writeln!(svg.body, r#"<line x1="{lx}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="{ORBIT_COLOR}"/>"#, y - 4.0, lx + 14.0, y - 4.0);
        svg.text(lx + 20.0, y, &format!("{n_orbits} orbit(s)"));
    }
    Ok(svg.finish())
}

fn orbits(report: &ScenarioReport) -> Result<String, PlotError> {
    if report.orbits.is_none() && report.nbody.is_none() {
        return Err(PlotError::Missing("orbits"));
    }
    let set = curves_of(report)?;
    let single = set.component_count() == 1;
    let panels = if single { 2.0 } else { 1.0 };
    let mut svg = Svg::new(panels * (PANEL + MARGIN) + MARGIN, PANEL + 2.0 * MARGIN + 20.0);
    let runs = orbit_runs(report);
    let curves: Vec<Vec<[f64; 2]>> = set.curves().iter().map(|c| project(c, CURVE_SAMPLES, (0, 1))).collect();
    let zs: Vec<Vec<[f64; 2]>> = runs.iter().flat_map(|r| &r.orbits).map(|o| project(&o.orbit.z, 512, (0, 1))).collect();
    let all: Vec<[f64; 2]> = curves.iter().chain(&zs).flatten().copied().collect();
    let left = Frame::around(MARGIN, MARGIN + 20.0, &all);
    svg.text(MARGIN, MARGIN + 10.0, "z(t) with the curve (first two coordinates)");
    svg.frame_box(&left);
    for c in &curves {
        svg.polyline(&left, c, "black", 1.5, true);
    }
    for z in &zs {
        svg.polyline(&left, z, ORBIT_COLOR, 1.0, true);
    }
    if single {
        let h = &set.curves()[0];
        let us: Vec<Vec<[f64; 2]>> = runs
            .iter()
            .flat_map(|r| &r.orbits)
            .map(|o| {
                let u = o.orbit.z.linear_combination(o.orbit.lambda, h, -o.orbit.lambda);
                project(&u, 512, (0, 1))
            })
            .collect();
        let mut all: Vec<[f64; 2]> = us.iter().flatten().copied().collect();
        all.push([0.0, 0.0]);
        let x0 = 2.0 * MARGIN + PANEL;
        let right = Frame::around(x0, MARGIN + 20.0, &all);
        svg.text(x0, MARGIN + 10.0, "u(t) = lambda (z - H), origin marked");
        svg.frame_box(&right);
        svg.dot(&right, [0.0, 0.0], 3.0, "black");
        for (k, u) in us.iter().enumerate() {
            svg.polyline(&right, u, PALETTE[k % PALETTE.len()], 1.0, true);
        }
    }
    Ok(svg.finish())
}

fn projections(report: &ScenarioReport) -> Result<String, PlotError> {
    let set = curves_of(report)?;
    if set.dimension() != 3 {
        return Err(PlotError::WrongDimension { kind: PlotKind::Projections, needed: "three-dimensional" });
    }
    let points: Vec<&[f64]> = match (&report.critical, &report.nbody) {
        (Some(c), _) => c.points.iter().map(|p| p.x.as_slice()).collect(),
        (None, Some(_)) | (None, None) => return Err(PlotError::Missing("critical")),
    };
    let runs = orbit_runs(report);
    let mut svg = Svg::new(3.0 * (PANEL + MARGIN) + MARGIN, PANEL + 2.0 * MARGIN + 20.0);
    for (k, (axes, label)) in [((0, 1), "xy"), ((0, 2), "xz"), ((1, 2), "yz")].into_iter().enumerate() {
        let curves: Vec<Vec<[f64; 2]>> = set.curves().iter().map(|c| project(c, CURVE_SAMPLES, axes)).collect();
        let all: Vec<[f64; 2]> = curves.iter().flatten().copied().collect();
        let x0 = MARGIN + k as f64 * (PANEL + MARGIN);
        let frame = Frame::around(x0, MARGIN + 20.0, &all);
        svg.text(x0, MARGIN + 10.0, &format!("{label} projection, {} critical point(s)", points.len()));
        svg.frame_box(&frame);
        for (i, c) in curves.iter().enumerate() {
            svg.polyline(&frame, c, PALETTE[i % PALETTE.len()], 1.5, true);
        }
        for run in &runs {
            for rec in &run.orbits {
                svg.polyline(&frame, &project(&rec.orbit.z, 256, axes), ORBIT_COLOR, 0.8, true);
            }
        }
        for p in &points {
            svg.dot(&frame, [p[axes.0], p[axes.1]], 4.0, "gold");
        }
    }
    Ok(svg.finish())
}
