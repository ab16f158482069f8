//! Deterministic SVG scatter plots of 2-d MDS solutions.
//!
//! Plain proofs are solid circles, ablated proofs open circles and human
//! proofs stars. GMM components are drawn as 2σ ellipse outlines. Data
//! coordinates map to the canvas with one uniform scale so ellipse shapes
//! and angles survive; the y axis points up.

use std::fmt::Write as _;

use proofspace::clustering::{covariance_ellipse, Ellipse, GmmModel};
use proofspace::json::format_f17;
use proofspace::Condition;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const WIDTH: f64 = 640.0;
pub const HEIGHT: f64 = 480.0;
pub const MARGIN: f64 = 40.0;
pub const MARKER_RADIUS: f64 = 5.0;
pub const ELLIPSE_SIGMA: f64 = 2.0;

/// An MDS solution with the proof each row belongs to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSolution {
    pub theorem_id: String,
    pub proof_ids: Vec<String>,
    pub conditions: Vec<Condition>,
    pub solution: proofspace::MdsSolution,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotPoint {
    pub x: f64,
    pub y: f64,
    pub condition: Condition,
    pub proof_id: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotSpec {
    pub title: Option<String>,
    pub points: Vec<PlotPoint>,
    pub ellipses: Vec<Ellipse>,
}

impl PlotSpec {
    pub fn from_solution(labeled: &LabeledSolution, gmm: Option<&GmmModel>) -> Result<Self, CliError> {
        let sol = &labeled.solution;
        if sol.k != 2 {
            return Err(CliError::DimensionNotTwo(sol.k));
        }
        if labeled.proof_ids.len() != sol.n() || labeled.conditions.len() != sol.n() {
            return Err(CliError::Usage(format!(
                "solution has {} rows but {} proof ids and {} conditions",
                sol.n(),
                labeled.proof_ids.len(),
                labeled.conditions.len()
            )));
        }
        let points = sol
            .coordinates
            .iter()
            .zip(&labeled.proof_ids)
            .zip(&labeled.conditions)
            .map(|((c, id), &condition)| PlotPoint { x: c[0], y: c[1], condition, proof_id: id.clone() })
            .collect();
        let ellipses = match gmm {
            Some(m) => gmm_ellipses(m)?,
            None => Vec::new(),
        };
        Ok(Self { title: Some(labeled.theorem_id.clone()), points, ellipses })
    }
}

pub fn gmm_ellipses(model: &GmmModel) -> Result<Vec<Ellipse>, CliError> {
    if model.dim != 2 {
        return Err(CliError::DimensionNotTwo(model.dim));
    }
    model
        .means
        .iter()
        .zip(&model.covariances)
        .map(|(m, c)| {
            let cov = [[c.0[0][0], c.0[0][1]], [c.0[1][0], c.0[1][1]]];
            Ok(covariance_ellipse([m[0], m[1]], cov, ELLIPSE_SIGMA)?)
        })
        .collect()
}

struct Frame {
    scale: f64,
    cx: f64,
    cy: f64,
}

impl Frame {
    fn fit(points: &[PlotPoint]) -> Self {
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for p in points {
            x0 = x0.min(p.x);
            x1 = x1.max(p.x);
            y0 = y0.min(p.y);
            y1 = y1.max(p.y);
        }
        if points.is_empty() {
            (x0, x1, y0, y1) = (-1.0, 1.0, -1.0, 1.0);
        }
        let span_x = if x1 > x0 { x1 - x0 } else { 1.0 };
        let span_y = if y1 > y0 { y1 - y0 } else { 1.0 };
        let scale = ((WIDTH - 2.0 * MARGIN) / span_x).min((HEIGHT - 2.0 * MARGIN) / span_y);
        Self { scale, cx: 0.5 * (x0 + x1), cy: 0.5 * (y0 + y1) }
    }

    fn map(&self, x: f64, y: f64) -> (f64, f64) {
        (WIDTH / 2.0 + (x - self.cx) * self.scale, HEIGHT / 2.0 - (y - self.cy) * self.scale)
    }
}

// Rounds away -0.000 so equal inputs always print the same bytes.
fn num(x: f64) -> String {
    let s = format!("{x:.3}");
    if s == "-0.000" { "0.000".to_owned() } else { s }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

fn star_path(x: f64, y: f64, outer: f64) -> String {
    let inner = outer * 0.4;
    let mut d = String::new();
    for i in 0..10 {
        let r = if i % 2 == 0 { outer } else { inner };
        let a = std::f64::consts::PI * (i as f64) / 5.0 - std::f64::consts::FRAC_PI_2;
        let _ = write!(d, "{}{} {} ", if i == 0 { "M" } else { "L" }, num(x + r * a.cos()), num(y + r * a.sin()));
    }
    d.push('Z');
    d
}

pub fn render_svg(spec: &PlotSpec) -> String {
    let frame = Frame::fit(&spec.points);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
        w = WIDTH,
        h = HEIGHT
    );
    if let Some(t) = &spec.title {
        let _ = writeln!(s, "  <title>{}</title>", escape(t));
    }
    let _ = writeln!(s, r#"  <rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(s, r#"  <g id="ellipses" fill="none" stroke="gray" stroke-width="1">"#);
    for e in &spec.ellipses {
        let (cx, cy) = frame.map(e.center[0], e.center[1]);
        let _ = writeln!(
            s,
            r#"    <ellipse cx="{}" cy="{}" rx="{}" ry="{}" transform="rotate({} {} {})" data-center-x="{}" data-center-y="{}" data-semi-major="{}" data-semi-minor="{}" data-angle="{}"/>"#,
            num(cx),
            num(cy),
            num(e.semi_axes[0] * frame.scale),
            num(e.semi_axes[1] * frame.scale),
            num(-e.angle.to_degrees()),
            num(cx),
            num(cy),
            format_f17(e.center[0]),
            format_f17(e.center[1]),
            format_f17(e.semi_axes[0]),
            format_f17(e.semi_axes[1]),
            format_f17(e.angle),
        );
    }
    let _ = writeln!(s, "  </g>");
    let _ = writeln!(s, r#"  <g id="points" stroke="black" stroke-width="1.5">"#);
    for p in &spec.points {
        let (x, y) = frame.map(p.x, p.y);
        let attrs = format!(r#"data-proof-id="{}" data-condition="{}""#, escape(&p.proof_id), p.condition);
        let _ = match p.condition {
            Condition::Plain => writeln!(s, r#"    <circle cx="{}" cy="{}" r="{MARKER_RADIUS}" fill="black" {attrs}/>"#, num(x), num(y)),
            Condition::Ablated => writeln!(s, r#"    <circle cx="{}" cy="{}" r="{MARKER_RADIUS}" fill="none" {attrs}/>"#, num(x), num(y)),
            Condition::Human => writeln!(s, r#"    <path d="{}" fill="black" {attrs}/>"#, star_path(x, y, 2.0 * MARKER_RADIUS)),
        };
    }
    let _ = writeln!(s, "  </g>");
    s.push_str("</svg>\n");
    s
}
