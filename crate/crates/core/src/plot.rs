//! Minimal deterministic SVG rendering: line plots of JD curves and
//! confidence-ellipse plots.

use std::fmt::Write as _;

use crate::baseball::Ellipse;
use crate::metrics::Rect;
use crate::{Error, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 170.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 55.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

/// Maps data coordinates into the plotting area.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub left: f64,
    pub top: f64,
    pub width: f64,
    pub height: f64,
}

impl Frame {
    fn new(x: (f64, f64), y: (f64, f64)) -> Self {
        let widen = |(lo, hi): (f64, f64)| if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
        let (x_min, x_max) = widen(x);
        let (y_min, y_max) = widen(y);
        Self {
            x_min,
            x_max,
            y_min,
            y_max,
            left: MARGIN_LEFT,
            top: MARGIN_TOP,
            width: WIDTH - MARGIN_LEFT - MARGIN_RIGHT,
            height: HEIGHT - MARGIN_TOP - MARGIN_BOTTOM,
        }
    }

    pub fn px(&self, x: f64, y: f64) -> (f64, f64) {
        (
            self.left + (x - self.x_min) / (self.x_max - self.x_min) * self.width,
            self.top + (self.y_max - y) / (self.y_max - self.y_min) * self.height,
        )
    }

    pub fn data(&self, px: f64, py: f64) -> (f64, f64) {
        (
            self.x_min + (px - self.left) / self.width * (self.x_max - self.x_min),
            self.y_max - (py - self.top) / self.height * (self.y_max - self.y_min),
        )
    }

    /// Pixels per data unit along x and y.
    fn scale(&self) -> (f64, f64) {
        (
            self.width / (self.x_max - self.x_min),
            self.height / (self.y_max - self.y_min),
        )
    }
}

/// Round tick positions covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    let raw = (hi - lo) / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 2.5, 5.0, 10.0]
        .into_iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step + 1e-9).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn label(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn header(out: &mut String, title: &str) {
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#).unwrap();
    writeln!(
        out,
        r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        (WIDTH - MARGIN_RIGHT + MARGIN_LEFT) / 2.0,
        escape(title)
    )
    .unwrap();
}

fn axes(out: &mut String, f: &Frame, x_label: &str, y_label: &str) {
    let bottom = f.top + f.height;
    writeln!(
        out,
        r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#333"/>"##,
        f.left, f.top, f.width, f.height
    )
    .unwrap();
    for t in ticks(f.x_min, f.x_max, 6) {
        let (x, _) = f.px(t, f.y_min);
        writeln!(
            out,
            r##"<line x1="{x:.2}" y1="{bottom:.2}" x2="{x:.2}" y2="{:.2}" stroke="#333"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
            bottom + 5.0,
            bottom + 19.0,
            label(t)
        )
        .unwrap();
    }
    for t in ticks(f.y_min, f.y_max, 6) {
        let (_, y) = f.px(f.x_min, t);
        writeln!(
            out,
            r##"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#333"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            f.left - 5.0,
            f.left,
            f.left - 8.0,
            y + 4.0,
            label(t)
        )
        .unwrap();
    }
    writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        f.left + f.width / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    )
    .unwrap();
    let (cx, cy) = (18.0, f.top + f.height / 2.0);
    writeln!(
        out,
        r#"<text x="{cx:.2}" y="{cy:.2}" text-anchor="middle" transform="rotate(-90 {cx:.2} {cy:.2})">{}</text>"#,
        escape(y_label)
    )
    .unwrap();
}

fn legend_entry(out: &mut String, index: usize, name: &str, color: &str) {
    let x = WIDTH - MARGIN_RIGHT + 15.0;
    let y = MARGIN_TOP + 10.0 + 20.0 * index as f64;
    writeln!(
        out,
        r#"<line x1="{x:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text>"#,
        x + 20.0,
        x + 26.0,
        y + 4.0,
        escape(name)
    )
    .unwrap();
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinePlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

impl LinePlot {
    /// Data ranges of all series, with zero included on the y axis.
    pub fn frame(&self) -> Result<Frame> {
        let pts = || self.series.iter().flat_map(|s| s.points.iter());
        if pts().next().is_none() {
            return Err(Error::InvalidParameter("nothing to plot".into()));
        }
        if pts().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(Error::InvalidParameter("non-finite point in plot data".into()));
        }
        let fold = |f: fn(&(f64, f64)) -> f64| {
            pts()
                .map(f)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
        };
        let (y_lo, y_hi) = fold(|p| p.1);
        Ok(Frame::new(fold(|p| p.0), (y_lo.min(0.0), y_hi)))
    }

    /// Each series is drawn as an unsmoothed polyline through its points.
    pub fn render(&self) -> Result<String> {
        let f = self.frame()?;
        let mut out = String::new();
        header(&mut out, &self.title);
        axes(&mut out, &f, &self.x_label, &self.y_label);
        for (i, s) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let pts: Vec<String> = s
                .points
                .iter()
                .map(|&(x, y)| {
                    let (px, py) = f.px(x, y);
                    format!("{px:.3},{py:.3}")
                })
                .collect();
            writeln!(
                out,
                r#"<polyline data-series="{}" points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
                escape(&s.label),
                pts.join(" ")
            )
            .unwrap();
            legend_entry(&mut out, i, &s.label, color);
        }
        out.push_str("</svg>\n");
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EllipsePlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub ellipses: Vec<(String, Ellipse)>,
    pub zone: Option<Rect>,
}

impl EllipsePlot {
    /// A square-pixel frame around every ellipse and the zone.
    pub fn frame(&self) -> Result<Frame> {
        if self.ellipses.is_empty() {
            return Err(Error::InvalidParameter("no ellipses to plot".into()));
        }
        let (mut x, mut y) = ((f64::INFINITY, f64::NEG_INFINITY), (f64::INFINITY, f64::NEG_INFINITY));
        let mut grow = |px: f64, py: f64| {
            x = (x.0.min(px), x.1.max(px));
            y = (y.0.min(py), y.1.max(py));
        };
        for (_, e) in &self.ellipses {
            let r = e.semi_major;
            grow(e.center[0] - r, e.center[1] - r);
            grow(e.center[0] + r, e.center[1] + r);
        }
        if let Some(z) = &self.zone {
            grow(z.x_lo, z.y_lo);
            grow(z.x_hi, z.y_hi);
        }
        let mut f = Frame::new(x, y);
        // Equal units per pixel on both axes.
        let per_px = ((f.x_max - f.x_min) / f.width).max((f.y_max - f.y_min) / f.height) * 1.1;
        let (cx, cy) = ((f.x_min + f.x_max) / 2.0, (f.y_min + f.y_max) / 2.0);
        f.x_min = cx - per_px * f.width / 2.0;
        f.x_max = cx + per_px * f.width / 2.0;
        f.y_min = cy - per_px * f.height / 2.0;
        f.y_max = cy + per_px * f.height / 2.0;
        Ok(f)
    }

    pub fn render(&self) -> Result<String> {
        let f = self.frame()?;
        let (sx, sy) = f.scale();
        let mut out = String::new();
        header(&mut out, &self.title);
        axes(&mut out, &f, &self.x_label, &self.y_label);
        if let Some(z) = &self.zone {
            let (x0, y0) = f.px(z.x_lo, z.y_hi);
            writeln!(
                out,
                r##"<rect class="zone" x="{x0:.3}" y="{y0:.3}" width="{:.3}" height="{:.3}" fill="none" stroke="#777" stroke-dasharray="4 3"/>"##,
                (z.x_hi - z.x_lo) * sx,
                (z.y_hi - z.y_lo) * sy
            )
            .unwrap();
        }
        for (i, (name, e)) in self.ellipses.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let (cx, cy) = f.px(e.center[0], e.center[1]);
            // The y axis points down on screen, so the rotation flips sign.
            let deg = -e.angle.to_degrees();
            let deg = if deg == 0.0 { 0.0 } else { deg };
            writeln!(
                out,
                r#"<ellipse data-series="{}" cx="{cx:.3}" cy="{cy:.3}" rx="{:.3}" ry="{:.3}" transform="rotate({deg:.3} {cx:.3} {cy:.3})" fill="none" stroke="{color}" stroke-width="2"/>"#,
                escape(name),
                e.semi_major * sx,
                e.semi_minor * sy,
            )
            .unwrap();
            legend_entry(&mut out, i, name, color);
        }
        out.push_str("</svg>\n");
        Ok(out)
    }
}
