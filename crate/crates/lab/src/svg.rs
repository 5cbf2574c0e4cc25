//! Minimal rectilinear SVG plots: line charts, scatter overlays and heatmaps.

use std::fmt::Write as _;

const W: f64 = 640.0;
const H: f64 = 400.0;
const MARGIN: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

pub struct Series<'a> {
    pub label: &'a str,
    pub points: Vec<(f64, f64)>,
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn fit<'a>(points: impl Iterator<Item = &'a (f64, f64)>) -> Frame {
        let (mut x, mut y) = ((f64::INFINITY, f64::NEG_INFINITY), (f64::INFINITY, f64::NEG_INFINITY));
        for &(a, b) in points.filter(|(a, b)| a.is_finite() && b.is_finite()) {
            x = (x.0.min(a), x.1.max(a));
            y = (y.0.min(b), y.1.max(b));
        }
        Frame { x: widen(x), y: widen(y) }
    }

    fn px(&self, v: f64) -> f64 {
        MARGIN + (v - self.x.0) / (self.x.1 - self.x.0) * (W - 2.0 * MARGIN)
    }

    fn py(&self, v: f64) -> f64 {
        H - MARGIN - (v - self.y.0) / (self.y.1 - self.y.0) * (H - 2.0 * MARGIN)
    }
}

fn widen((lo, hi): (f64, f64)) -> (f64, f64) {
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn open(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));
    s
}

fn axes(s: &mut String, f: &Frame, xlabel: &str, ylabel: &str) {
    let (x0, x1, y0, y1) = (MARGIN, W - MARGIN, H - MARGIN, MARGIN);
    let _ = writeln!(s, r#"<polyline points="{x0},{y1} {x0},{y0} {x1},{y0}" fill="none" stroke="black"/>"#);
    for (v, anchor, x, y) in [
        (f.x.0, "start", x0, y0 + 15.0),
        (f.x.1, "end", x1, y0 + 15.0),
        (f.y.0, "end", x0 - 4.0, y0),
        (f.y.1, "end", x0 - 4.0, y1 + 4.0),
    ] {
        let _ = writeln!(s, r#"<text x="{x:.1}" y="{y:.1}" text-anchor="{anchor}">{}</text>"#, tick(v));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 12.0, escape(xlabel));
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(ylabel)
    );
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Line chart of one or more series sharing axes.
pub fn line_chart(title: &str, xlabel: &str, ylabel: &str, series: &[Series]) -> String {
    let f = Frame::fit(series.iter().flat_map(|s| s.points.iter()));
    let mut s = open(title);
    axes(&mut s, &f, xlabel, ylabel);
    for (i, ser) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = ser
            .points
            .iter()
            .filter(|(a, b)| a.is_finite() && b.is_finite())
            .map(|&(a, b)| format!("{:.2},{:.2}", f.px(a), f.py(b)))
            .collect();
        let _ =
            writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.2"/>"#, pts.join(" "));
        let ly = MARGIN + 14.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{ly}" text-anchor="end" fill="{color}">{}</text>"#,
            W - MARGIN,
            escape(ser.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Heatmap of `(x, y, value)` cells on a regular grid, optionally overlaid
/// with scatter points.
pub fn heatmap(title: &str, cells: &[[f64; 3]], nx: usize, ny: usize, overlay: &[(f64, f64)]) -> String {
    let pts: Vec<(f64, f64)> = cells.iter().map(|c| (c[0], c[1])).collect();
    let f = Frame::fit(pts.iter());
    let (lo, hi) = widen(cells.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), c| (a.min(c[2]), b.max(c[2]))));
    let cw = (W - 2.0 * MARGIN) / (nx.max(2) - 1) as f64;
    let ch = (H - 2.0 * MARGIN) / (ny.max(2) - 1) as f64;
    let mut s = open(title);
    for c in cells {
        let t = (c[2] - lo) / (hi - lo);
        let r = (255.0 * t) as u8;
        let b = (255.0 * (1.0 - t)) as u8;
        let _ = writeln!(
            s,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="rgb({r},64,{b})"/>"#,
            f.px(c[0]) - cw / 2.0,
            f.py(c[1]) - ch / 2.0,
            cw + 0.5,
            ch + 0.5
        );
    }
    for &(a, b) in overlay {
        if a >= f.x.0 && a <= f.x.1 && b >= f.y.0 && b <= f.y.1 {
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="1.5" fill="white"/>"#, f.px(a), f.py(b));
        }
    }
    axes(&mut s, &f, "x", "y");
    s.push_str("</svg>\n");
    s
}

/// Bar chart of histogram counts over `[lo, hi]` bins.
pub fn bars(title: &str, edges: &[f64], counts: &[u64]) -> String {
    let max = counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    let f = Frame { x: widen((edges[0], edges[edges.len() - 1])), y: (0.0, max) };
    let mut s = open(title);
    for (i, &c) in counts.iter().enumerate() {
        let (x0, x1) = (f.px(edges[i]), f.px(edges[i + 1]));
        let y = f.py(c as f64);
        let _ = writeln!(
            s,
            r##"<rect x="{x0:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="#1f77b4" stroke="white"/>"##,
            x1 - x0,
            H - MARGIN - y
        );
    }
    axes(&mut s, &f, "weight", "count");
    s.push_str("</svg>\n");
    s
}
