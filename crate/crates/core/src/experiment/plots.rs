//! Minimal self-contained SVG charts.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

pub const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn new(x: (f64, f64), y: (f64, f64)) -> Self {
        let widen = |(lo, hi): (f64, f64)| if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
        Self { x: widen(x), y: widen(y) }
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        H - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (H - TOP - BOTTOM)
    }
}

fn open(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#, W / 2.0, escape(title));
    s
}

fn axes(s: &mut String, f: &Frame, xlabel: &str, ylabel: &str, xticks: bool) {
    let (x0, x1, y0, y1) = (LEFT, W - RIGHT, TOP, H - BOTTOM);
    let _ = writeln!(s, r#"<path d="M{x0} {y0} L{x0} {y1} L{x1} {y1}" fill="none" stroke="black"/>"#);
    for i in 0..=4 {
        let v = f.y.0 + (f.y.1 - f.y.0) * f64::from(i) / 4.0;
        let y = f.py(v);
        let _ = writeln!(s, r#"<line x1="{}" y1="{y:.2}" x2="{x0}" y2="{y:.2}" stroke="black"/><text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, x0 - 4.0, x0 - 6.0, y + 4.0, tick(v));
        if xticks {
            let v = f.x.0 + (f.x.1 - f.x.0) * f64::from(i) / 4.0;
            let x = f.px(v);
            let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{y1}" x2="{x:.2}" y2="{}" stroke="black"/><text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#, y1 + 4.0, y1 + 18.0, tick(v));
        }
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (x0 + x1) / 2.0, H - 16.0, escape(xlabel));
    let _ = writeln!(s, r#"<text transform="translate(18 {}) rotate(-90)" text-anchor="middle">{}</text>"#, (y0 + y1) / 2.0, escape(ylabel));
}

fn tick(v: f64) -> String {
    let t = format!("{v:.3}");
    t.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if lo <= hi {
        (lo, hi)
    } else {
        (0.0, 1.0)
    }
}

fn legend(s: &mut String, names: &[(&str, &str)]) {
    for (i, (name, color)) in names.iter().enumerate() {
        let y = TOP + 8.0 + 16.0 * i as f64;
        let x = W - RIGHT - 150.0;
        let _ = writeln!(s, r#"<rect x="{x}" y="{}" width="10" height="10" fill="{color}"/><text x="{}" y="{}">{}</text>"#, y - 9.0, x + 14.0, y, escape(name));
    }
}

/// Vertical bars, one per label, on a zero baseline.
pub fn bar_chart(title: &str, labels: &[String], values: &[f64], ylabel: &str) -> String {
    let mut s = open(title);
    let f = Frame::new((0.0, labels.len().max(1) as f64), (0.0, range(values.iter().copied()).1.max(1e-9)));
    axes(&mut s, &f, "", ylabel, false);
    let slot = (W - LEFT - RIGHT) / labels.len().max(1) as f64;
    for (i, (label, &v)) in labels.iter().zip(values).enumerate() {
        let x = LEFT + slot * (i as f64 + 0.15);
        let (top, base) = (f.py(v), f.py(0.0));
        let _ = writeln!(s, r#"<rect x="{x:.2}" y="{top:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#, slot * 0.7, base - top, PALETTE[0]);
        let _ = writeln!(s, r#"<text transform="translate({:.2} {}) rotate(45)" font-size="10">{}</text>"#, x + slot * 0.35, H - BOTTOM + 12.0, escape(label));
    }
    s.push_str("</svg>\n");
    s
}

/// Colour-mapped grid; `values[i][j]` belongs to `xs[i]`, `ys[j]`.
pub fn heatmap(title: &str, xs: &[f64], ys: &[f64], values: &[Vec<f64>], xlabel: &str, ylabel: &str) -> String {
    let mut s = open(title);
    let f = Frame::new(range(xs.iter().copied()), range(ys.iter().copied()));
    let (lo, hi) = range(values.iter().flatten().copied());
    let cw = (W - LEFT - RIGHT) / xs.len().max(1) as f64;
    let ch = (H - TOP - BOTTOM) / ys.len().max(1) as f64;
    for (i, col) in values.iter().enumerate() {
        for (j, &v) in col.iter().enumerate() {
            let t = if hi > lo { (v - lo) / (hi - lo) } else { 0.5 };
            let (r, g, b) = ((255.0 * t) as u8, (80.0 + 100.0 * (1.0 - (2.0 * t - 1.0).abs())) as u8, (255.0 * (1.0 - t)) as u8);
            let _ = writeln!(s, r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="rgb({r},{g},{b})"><title>{v}</title></rect>"#, LEFT + cw * i as f64, H - BOTTOM - ch * (j + 1) as f64, cw + 0.5, ch + 0.5);
        }
    }
    axes(&mut s, &f, xlabel, ylabel, true);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end" font-size="10">min {} / max {}</text>"#, W - RIGHT, TOP - 4.0, tick(lo), tick(hi));
    s.push_str("</svg>\n");
    s
}

/// Series of `(x, y)` points, joined by lines when `lines` is set.
pub fn xy_chart(title: &str, series: &[(String, Vec<(f64, f64)>)], xlabel: &str, ylabel: &str, lines: bool) -> String {
    let mut s = open(title);
    let f = Frame::new(
        range(series.iter().flat_map(|(_, p)| p.iter().map(|q| q.0))),
        range(series.iter().flat_map(|(_, p)| p.iter().map(|q| q.1))),
    );
    axes(&mut s, &f, xlabel, ylabel, true);
    let mut names = Vec::new();
    for (k, (name, pts)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        names.push((name.as_str(), color));
        if lines && pts.len() > 1 {
            let d: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", f.px(x), f.py(y))).collect();
            let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, d.join(" "));
        }
        for &(x, y) in pts {
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, f.px(x), f.py(y));
        }
    }
    legend(&mut s, &names);
    s.push_str("</svg>\n");
    s
}
