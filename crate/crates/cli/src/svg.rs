//! Minimal static SVG charts: line charts, a SHAP dot summary and a bar chart.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 7] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
    width: f64,
    height: f64,
    left: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        let span = self.x.1 - self.x.0;
        self.left + if span > 0.0 { (x - self.x.0) / span } else { 0.5 } * (self.width - self.left - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        let span = self.y.1 - self.y.0;
        self.height - BOTTOM - if span > 0.0 { (y - self.y.0) / span } else { 0.5 } * (self.height - TOP - BOTTOM)
    }
}

fn open(out: &mut String, width: f64, height: f64, title: &str) {
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="15">{}</text>"#, width / 2.0, escape(title));
}

fn axes(out: &mut String, f: &Frame, xlabel: &str, ylabel: &str) {
    let (x0, x1, y0, y1) = (f.px(f.x.0), f.px(f.x.1), f.py(f.y.0), f.py(f.y.1));
    let _ = writeln!(out, r#"<path d="M{x0:.1},{y1:.1} L{x0:.1},{y0:.1} L{x1:.1},{y0:.1}" fill="none" stroke="black"/>"#);
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let xv = f.x.0 + t * (f.x.1 - f.x.0);
        let yv = f.y.0 + t * (f.y.1 - f.y.0);
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, f.px(xv), y0 + 16.0, tick(xv));
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, x0 - 6.0, f.py(yv) + 4.0, tick(yv));
    }
    let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, (x0 + x1) / 2.0, f.height - 12.0, escape(xlabel));
    let _ = writeln!(
        out,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(ylabel)
    );
}

fn tick(v: f64) -> String {
    if v.abs() >= 100.0 || v == v.trunc() {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

fn span_tick(v: f64, span: f64) -> String {
    let decimals = (2.0 - span.log10().floor()).clamp(0.0, 6.0) as usize;
    format!("{v:.decimals$}")
}

/// Baseline with five ticks under a chart whose rows end at `y`.
fn x_axis(out: &mut String, f: &Frame, y: f64) {
    let (x0, x1) = (f.px(f.x.0), f.px(f.x.1));
    let _ = writeln!(out, r#"<line x1="{x0:.1}" y1="{y:.1}" x2="{x1:.1}" y2="{y:.1}" stroke="black"/>"#);
    for i in 0..=4 {
        let v = f.x.0 + i as f64 / 4.0 * (f.x.1 - f.x.0);
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, f.px(v), y + 16.0, span_tick(v, f.x.1 - f.x.0));
    }
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if lo.is_finite() {
        (lo, hi)
    } else {
        (0.0, 1.0)
    }
}

pub struct Series<'a> {
    pub name: &'a str,
    pub points: Vec<(f64, f64)>,
}

/// Line chart. `unit_square` fixes both axes to [0, 1] and draws the diagonal.
pub fn line_chart(title: &str, xlabel: &str, ylabel: &str, series: &[Series<'_>], unit_square: bool) -> String {
    let (x, y) = if unit_square {
        ((0.0, 1.0), (0.0, 1.0))
    } else {
        (
            bounds(series.iter().flat_map(|s| s.points.iter().map(|p| p.0))),
            bounds(series.iter().flat_map(|s| s.points.iter().map(|p| p.1))),
        )
    };
    let f = Frame { x, y, width: W, height: H, left: LEFT };
    let mut out = String::new();
    open(&mut out, W, H, title);
    axes(&mut out, &f, xlabel, ylabel);
    if unit_square {
        let _ = writeln!(
            out,
            r##"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="#999" stroke-dasharray="4 4"/>"##,
            f.px(0.0),
            f.py(0.0),
            f.px(1.0),
            f.py(1.0)
        );
    }
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let d: Vec<String> = s
            .points
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .enumerate()
            .map(|(k, p)| format!("{}{:.1},{:.1}", if k == 0 { 'M' } else { 'L' }, f.px(p.0), f.py(p.1)))
            .collect();
        let _ = writeln!(out, r#"<path d="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, d.join(" "));
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" fill="{color}">{}</text>"#, LEFT + 10.0, TOP + 14.0 + 14.0 * i as f64, escape(s.name));
    }
    out.push_str("</svg>\n");
    out
}

/// One row per feature (top first); dots at the SHAP value, coloured from
/// blue (low feature value) to red (high), with deterministic vertical jitter.
pub fn shap_summary(title: &str, features: &[(String, Vec<(f64, f64)>)]) -> String {
    let row_h = 26.0;
    let left = 170.0;
    let height = TOP + BOTTOM + row_h * features.len().max(1) as f64;
    let x = bounds(features.iter().flat_map(|(_, pts)| pts.iter().map(|p| p.0)));
    let m = x.0.abs().max(x.1.abs()).max(1e-12);
    let f = Frame { x: (-m, m), y: (0.0, 1.0), width: W, height, left };
    let mut out = String::new();
    open(&mut out, W, height, title);
    let _ = writeln!(out, r##"<line x1="{0:.1}" y1="{1:.1}" x2="{0:.1}" y2="{2:.1}" stroke="#999"/>"##, f.px(0.0), TOP, height - BOTTOM);
    for (r, (name, pts)) in features.iter().enumerate() {
        let cy = TOP + row_h * (r as f64 + 0.5);
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, left - 8.0, cy + 4.0, escape(name));
        let (vlo, vhi) = bounds(pts.iter().map(|p| p.1));
        for (k, &(phi, value)) in pts.iter().enumerate() {
            let t = if vhi > vlo { (value - vlo) / (vhi - vlo) } else { 0.5 };
            let (red, blue) = ((255.0 * t) as u8, (255.0 * (1.0 - t)) as u8);
            // golden-ratio jitter in [-0.35, 0.35] rows
            let jitter = ((k as f64 * 0.618_033_988_75).fract() - 0.5) * 0.7 * row_h;
            let _ = writeln!(out, r#"<circle cx="{:.1}" cy="{:.1}" r="2" fill="rgb({red},40,{blue})" fill-opacity="0.7"/>"#, f.px(phi), cy + jitter);
        }
    }
    x_axis(&mut out, &f, height - BOTTOM);
    let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">SHAP value (margin)</text>"#, (left + W - RIGHT) / 2.0, height - 12.0);
    out.push_str("</svg>\n");
    out
}

/// Horizontal bars with optional whiskers `(label, value, lo, hi)`.
pub fn bar_chart(title: &str, xlabel: &str, bars: &[(String, f64, Option<(f64, f64)>)]) -> String {
    let row_h = 22.0;
    let left = 170.0;
    let height = TOP + BOTTOM + row_h * bars.len().max(1) as f64;
    let x = bounds(bars.iter().flat_map(|b| [b.1, b.2.map_or(b.1, |w| w.0), b.2.map_or(b.1, |w| w.1), 0.0]));
    let f = Frame { x, y: (0.0, 1.0), width: W, height, left };
    let mut out = String::new();
    open(&mut out, W, height, title);
    for (r, (name, value, whisker)) in bars.iter().enumerate() {
        let cy = TOP + row_h * (r as f64 + 0.5);
        let (a, b) = (f.px(0.0).min(f.px(*value)), f.px(0.0).max(f.px(*value)));
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, left - 8.0, cy + 4.0, escape(name));
        let _ = writeln!(out, r#"<rect x="{a:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="{}"/>"#, cy - row_h * 0.35, b - a, row_h * 0.7, PALETTE[0]);
        if let Some((lo, hi)) = whisker {
            let _ = writeln!(out, r#"<line x1="{:.1}" y1="{cy:.1}" x2="{:.1}" y2="{cy:.1}" stroke="black"/>"#, f.px(*lo), f.px(*hi));
        }
    }
    let _ = writeln!(out, r##"<line x1="{0:.1}" y1="{1:.1}" x2="{0:.1}" y2="{2:.1}" stroke="#999"/>"##, f.px(0.0), TOP, height - BOTTOM);
    x_axis(&mut out, &f, height - BOTTOM);
    let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, (left + W - RIGHT) / 2.0, height - 12.0, escape(xlabel));
    out.push_str("</svg>\n");
    out
}
