//! Minimal static SVG renderings: scatter plots, line plots and histograms.

use std::fmt::Write;

const W: f64 = 480.0;
const H: f64 = 400.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

pub const PALETTE: [&str; 5] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
    out: String,
}

impl Frame {
    fn new(title: &str, xlabel: &str, ylabel: &str, x: (f64, f64), y: (f64, f64)) -> Self {
        let widen = |(a, b): (f64, f64)| if b > a { (a, b) } else { (a - 0.5, a + 0.5) };
        let (x, y) = (widen(x), widen(y));
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(out, r#"<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(
            out,
            r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
            W / 2.0,
            escape(title)
        );
        let (x0, x1, y0, y1) = (LEFT, W - RIGHT, H - BOTTOM, TOP);
        let _ = writeln!(
            out,
            r#"<rect x="{x0}" y="{y1}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            x1 - x0,
            y0 - y1
        );
        let mut f = Frame { x, y, out };
        for k in 0..=4 {
            let t = k as f64 / 4.0;
            let xv = f.x.0 + t * (f.x.1 - f.x.0);
            let yv = f.y.0 + t * (f.y.1 - f.y.0);
            let (px, py) = (f.px(xv), f.py(yv));
            let _ = writeln!(
                f.out,
                r#"<text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                y0 + 16.0,
                tick(xv)
            );
            let _ = writeln!(
                f.out,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
                x0 - 6.0,
                py + 4.0,
                tick(yv)
            );
        }
        let _ = writeln!(
            f.out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            (x0 + x1) / 2.0,
            H - 12.0,
            escape(xlabel)
        );
        let _ = writeln!(
            f.out,
            r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
            (y0 + y1) / 2.0,
            (y0 + y1) / 2.0,
            escape(ylabel)
        );
        f
    }

    fn px(&self, v: f64) -> f64 {
        LEFT + (v - self.x.0) / (self.x.1 - self.x.0) * (W - RIGHT - LEFT)
    }

    fn py(&self, v: f64) -> f64 {
        H - BOTTOM - (v - self.y.0) / (self.y.1 - self.y.0) * (H - BOTTOM - TOP)
    }

    fn legend(&mut self, labels: &[(&str, &str)]) {
        for (k, (label, color)) in labels.iter().enumerate() {
            let y = TOP + 14.0 + 16.0 * k as f64;
            let _ = writeln!(
                self.out,
                r#"<rect x="{:.2}" y="{:.2}" width="10" height="10" fill="{color}"/><text x="{:.2}" y="{:.2}">{}</text>"#,
                LEFT + 8.0,
                y - 9.0,
                LEFT + 22.0,
                y,
                escape(label)
            );
        }
    }

    fn finish(mut self) -> String {
        self.out.push_str("</svg>\n");
        self.out
    }
}

fn tick(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)))
}

/// Scatter plot on the unit square with the 1:1 line.
pub fn unit_scatter(title: &str, xlabel: &str, ylabel: &str, series: &[Series]) -> String {
    let mut f = Frame::new(title, xlabel, ylabel, (0.0, 1.0), (0.0, 1.0));
    let _ = writeln!(
        f.out,
        r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#888" stroke-dasharray="4 3"/>"##,
        f.px(0.0),
        f.py(0.0),
        f.px(1.0),
        f.py(1.0)
    );
    for (s, color) in series.iter().zip(PALETTE.iter().cycle()) {
        for &(x, y) in s.points.iter().filter(|(x, y)| x.is_finite() && y.is_finite()) {
            let _ = writeln!(
                f.out,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}" fill-opacity="0.7"/>"#,
                f.px(x),
                f.py(y)
            );
        }
    }
    let labels: Vec<_> = series.iter().zip(PALETTE.iter().cycle()).map(|(s, c)| (s.label.as_str(), *c)).collect();
    f.legend(&labels);
    f.finish()
}

/// Line plot with axis ranges taken from the data.
pub fn line_plot(title: &str, xlabel: &str, ylabel: &str, series: &[Series]) -> String {
    let all = || series.iter().flat_map(|s| s.points.iter());
    let xr = range(all().map(|p| p.0));
    let yr = range(all().map(|p| p.1));
    let yr = if yr.0.is_finite() { (yr.0.min(0.0), yr.1) } else { (0.0, 1.0) };
    let xr = if xr.0.is_finite() { xr } else { (0.0, 1.0) };
    let mut f = Frame::new(title, xlabel, ylabel, xr, yr);
    for (s, color) in series.iter().zip(PALETTE.iter().cycle()) {
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", f.px(x), f.py(y)))
            .collect();
        let _ = writeln!(
            f.out,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            pts.join(" ")
        );
    }
    let labels: Vec<_> = series.iter().zip(PALETTE.iter().cycle()).map(|(s, c)| (s.label.as_str(), *c)).collect();
    f.legend(&labels);
    f.finish()
}

/// Density histograms of angles in [0, 1] (one series per source) with an
/// optional reference density curve.
pub fn histogram(title: &str, bins: &[(f64, f64)], series: &[Series], reference: Option<&Series>) -> String {
    let ymax = series
        .iter()
        .chain(reference)
        .flat_map(|s| s.points.iter().map(|p| p.1))
        .filter(|v| v.is_finite())
        .fold(0.0_f64, f64::max);
    let mut f = Frame::new(title, "angle", "density", (0.0, 1.0), (0.0, if ymax > 0.0 { ymax * 1.05 } else { 1.0 }));
    let k = series.len().max(1) as f64;
    for (j, (s, color)) in series.iter().zip(PALETTE.iter().cycle()).enumerate() {
        for (&(lo, hi), &(_, d)) in bins.iter().zip(&s.points) {
            let width = (hi - lo) / k;
            let x = lo + j as f64 * width;
            let (x0, x1) = (f.px(x), f.px(x + width));
            let (y0, y1) = (f.py(0.0), f.py(if d.is_finite() { d } else { 0.0 }));
            let _ = writeln!(
                f.out,
                r#"<rect x="{x0:.2}" y="{y1:.2}" width="{:.2}" height="{:.2}" fill="{color}" fill-opacity="0.6"/>"#,
                x1 - x0,
                y0 - y1
            );
        }
    }
    let mut labels: Vec<_> = series.iter().zip(PALETTE.iter().cycle()).map(|(s, c)| (s.label.as_str(), *c)).collect();
    if let Some(r) = reference {
        let pts: Vec<String> = r
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", f.px(x), f.py(y)))
            .collect();
        let _ = writeln!(
            f.out,
            r#"<polyline points="{}" fill="none" stroke="black" stroke-width="1.5"/>"#,
            pts.join(" ")
        );
        labels.push((r.label.as_str(), "black"));
    }
    f.legend(&labels);
    f.finish()
}
