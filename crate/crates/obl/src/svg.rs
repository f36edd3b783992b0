//! Self-contained SVG plots of the phase cylinder `[0, 2pi) x (0, pi)`.

use std::f64::consts::{PI, TAU};
use std::fmt::Write;

use obl_core::PhasePoint;

pub const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2"];

pub struct PhasePlot {
    width: f64,
    height: f64,
    margin: f64,
    body: String,
}

impl PhasePlot {
    pub fn new(width: f64, height: f64) -> Self {
        Self {
            width,
            height,
            margin: 40.0,
            body: String::new(),
        }
    }

    fn x(&self, phi: f64) -> f64 {
        self.margin + phi.rem_euclid(TAU) / TAU * (self.width - 2.0 * self.margin)
    }

    fn y(&self, theta: f64) -> f64 {
        self.height - self.margin - theta / PI * (self.height - 2.0 * self.margin)
    }

    pub fn dots(&mut self, points: &[PhasePoint], color: &str, radius: f64) {
        for p in points {
            let _ = write!(
                self.body,
                r#"<circle cx="{:.2}" cy="{:.2}" r="{radius}" fill="{color}"/>"#,
                self.x(p.phi),
                self.y(p.theta)
            );
        }
        self.body.push('\n');
    }

    /// A polyline in lifted coordinates, split where it wraps around.
    pub fn curve(&mut self, points: &[PhasePoint], color: &str, stroke: f64) {
        let mut run: Vec<(f64, f64)> = Vec::new();
        let flush = |run: &mut Vec<(f64, f64)>, body: &mut String| {
            if run.len() > 1 {
                let pts: Vec<String> = run.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
                let _ = writeln!(
                    body,
                    r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="{stroke}"/>"#,
                    pts.join(" ")
                );
            }
            run.clear();
        };
        let mut last: Option<f64> = None;
        for p in points {
            let x = self.x(p.phi);
            if last.is_some_and(|l| (x - l).abs() > 0.5 * (self.width - 2.0 * self.margin)) {
                flush(&mut run, &mut self.body);
            }
            run.push((x, self.y(p.theta)));
            last = Some(x);
        }
        flush(&mut run, &mut self.body);
    }

    /// Filled grid cells of a `bins x cells` raster.
    pub fn cells(&mut self, cells: &[(u32, u32)], bins: usize, rows: usize, color: &str, opacity: f64) {
        let w = (self.width - 2.0 * self.margin) / bins as f64;
        let h = (self.height - 2.0 * self.margin) / rows as f64;
        let _ = write!(self.body, r#"<g fill="{color}" fill-opacity="{opacity}">"#);
        for &(i, j) in cells {
            let _ = write!(
                self.body,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}"/>"#,
                self.margin + i as f64 * w,
                self.height - self.margin - (j as f64 + 1.0) * h,
                w,
                h
            );
        }
        self.body.push_str("</g>\n");
    }

    pub fn finish(self, title: &str) -> String {
        let (w, h, m) = (self.width, self.height, self.margin);
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
        );
        let _ = writeln!(out, "<title>{}</title>", escape(title));
        let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
        let _ = writeln!(
            out,
            r##"<rect x="{m}" y="{m}" width="{}" height="{}" fill="none" stroke="#444"/>"##,
            w - 2.0 * m,
            h - 2.0 * m
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">phi</text>"#,
            w / 2.0,
            h - 12.0
        );
        let _ = writeln!(
            out,
            r#"<text x="14" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">theta</text>"#,
            h / 2.0
        );
        out.push_str(&self.body);
        out.push_str("</svg>\n");
        out
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
