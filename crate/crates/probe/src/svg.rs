//! Small static SVG plots: line charts, grouped bars and 2-D projections.

use std::fmt::Write;

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#17becf", "#8c564b", "#e377c2"];

const W: f64 = 640.0;
const H: f64 = 400.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

pub fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Axis range padded so flat data still gets a visible band.
fn span(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        let pad = if lo.abs() > 1e-12 { lo.abs() * 0.1 } else { 0.5 };
        return (lo - pad, hi + pad);
    }
    (lo, hi)
}

/// Plot area with linear mapping from data space to pixels.
struct Frame {
    x0: f64,
    y0: f64,
    w: f64,
    h: f64,
    xr: (f64, f64),
    yr: (f64, f64),
}

impl Frame {
    fn x(&self, v: f64) -> f64 {
        self.x0 + (v - self.xr.0) / (self.xr.1 - self.xr.0) * self.w
    }

    fn y(&self, v: f64) -> f64 {
        self.y0 + self.h - (v - self.yr.0) / (self.yr.1 - self.yr.0) * self.h
    }

    fn axes(&self, out: &mut String, x_label: &str, y_label: &str, ticks: usize) {
        let (x1, y1) = (self.x0 + self.w, self.y0 + self.h);
        let _ = writeln!(
            out,
            r##"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="#444"/>"##,
            self.x0, self.y0, self.w, self.h
        );
        for i in 0..=ticks {
            let t = i as f64 / ticks as f64;
            let xv = self.xr.0 + t * (self.xr.1 - self.xr.0);
            let yv = self.yr.0 + t * (self.yr.1 - self.yr.0);
            let (px, py) = (self.x(xv), self.y(yv));
            let _ = writeln!(
                out,
                r##"<line x1="{px:.1}" y1="{y1:.1}" x2="{px:.1}" y2="{:.1}" stroke="#444"/><text x="{px:.1}" y="{:.1}" font-size="10" text-anchor="middle">{}</text>"##,
                y1 + 4.0,
                y1 + 16.0,
                tick(xv)
            );
            let _ = writeln!(
                out,
                r##"<line x1="{:.1}" y1="{py:.1}" x2="{:.1}" y2="{py:.1}" stroke="#444"/><text x="{:.1}" y="{:.1}" font-size="10" text-anchor="end">{}</text>"##,
                self.x0 - 4.0,
                self.x0,
                self.x0 - 6.0,
                py + 3.0,
                tick(yv)
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">{}</text>"#,
            self.x0 + self.w / 2.0,
            y1 + 34.0,
            escape(x_label)
        );
        let (lx, ly) = (self.x0 - 44.0, self.y0 + self.h / 2.0);
        let _ = writeln!(
            out,
            r#"<text x="{lx:.1}" y="{ly:.1}" font-size="12" text-anchor="middle" transform="rotate(-90 {lx:.1} {ly:.1})">{}</text>"#,
            escape(y_label)
        );
        let _ = x1;
    }
}

fn tick(v: f64) -> String {
    if v.abs() >= 100.0 || v == v.trunc() {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

fn open(out: &mut String, width: f64, height: f64, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="22" font-size="14" text-anchor="middle">{}</text>"#,
        width / 2.0,
        escape(title)
    );
}

fn legend(out: &mut String, names: &[&str], x: f64, y: f64) {
    for (i, name) in names.iter().enumerate() {
        let yy = y + 14.0 * i as f64;
        let _ = writeln!(
            out,
            r#"<rect x="{x:.1}" y="{:.1}" width="10" height="10" fill="{}"/><text x="{:.1}" y="{:.1}" font-size="11">{}</text>"#,
            yy - 9.0,
            PALETTE[i % PALETTE.len()],
            x + 14.0,
            yy,
            escape(name)
        );
    }
}

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

/// Polylines over shared axes; `marks` draws labelled vertical guides.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series], marks: &[(f64, String)]) -> String {
    let xr = span(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let yr = span(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
    let f = Frame {
        x0: LEFT,
        y0: TOP,
        w: W - LEFT - RIGHT,
        h: H - TOP - BOTTOM,
        xr,
        yr,
    };
    let mut out = String::new();
    open(&mut out, W, H, title);
    f.axes(&mut out, x_label, y_label, 4);
    for (x, label) in marks {
        let px = f.x(*x);
        let _ = writeln!(
            out,
            r##"<line x1="{px:.1}" y1="{:.1}" x2="{px:.1}" y2="{:.1}" stroke="#999" stroke-dasharray="4 3"/><text x="{px:.1}" y="{:.1}" font-size="10" text-anchor="middle" fill="#666">{}</text>"##,
            f.y0,
            f.y0 + f.h,
            f.y0 - 4.0,
            escape(label)
        );
    }
    for (i, s) in series.iter().enumerate() {
        let pts: Vec<String> = s.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", f.x(x), f.y(y))).collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
            PALETTE[i % PALETTE.len()],
            pts.join(" ")
        );
    }
    if series.len() > 1 {
        let names: Vec<&str> = series.iter().map(|s| s.name.as_str()).collect();
        legend(&mut out, &names, W - RIGHT - 150.0, TOP + 14.0);
    }
    out.push_str("</svg>\n");
    out
}

/// Grouped vertical bars: one group per category, one bar per series.
pub fn bar_chart(title: &str, y_label: &str, categories: &[String], series: &[(&str, Vec<f64>)]) -> String {
    let width = (LEFT + RIGHT + 40.0 * categories.len().max(1) as f64).max(W);
    let lo = series.iter().flat_map(|s| s.1.iter().copied()).fold(0.0f64, f64::min);
    let hi = series.iter().flat_map(|s| s.1.iter().copied()).fold(1.0f64, f64::max);
    let f = Frame {
        x0: LEFT,
        y0: TOP,
        w: width - LEFT - RIGHT,
        h: H - TOP - BOTTOM - 30.0,
        xr: (0.0, categories.len().max(1) as f64),
        yr: (lo, hi),
    };
    let mut out = String::new();
    open(&mut out, width, H, title);
    let _ = writeln!(
        out,
        r##"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="#444"/>"##,
        f.x0, f.y0, f.w, f.h
    );
    for i in 0..=4 {
        let v = lo + (hi - lo) * i as f64 / 4.0;
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="end">{}</text>"#,
            f.x0 - 6.0,
            f.y(v) + 3.0,
            tick(v)
        );
    }
    let (lx, ly) = (f.x0 - 44.0, f.y0 + f.h / 2.0);
    let _ = writeln!(
        out,
        r#"<text x="{lx:.1}" y="{ly:.1}" font-size="12" text-anchor="middle" transform="rotate(-90 {lx:.1} {ly:.1})">{}</text>"#,
        escape(y_label)
    );
    let zero = f.y(0.0);
    let group = f.w / categories.len().max(1) as f64;
    let bar = group * 0.8 / series.len().max(1) as f64;
    for (c, name) in categories.iter().enumerate() {
        let gx = f.x0 + group * c as f64 + group * 0.1;
        for (s, (_, values)) in series.iter().enumerate() {
            let v = values.get(c).copied().unwrap_or(0.0);
            let (top, h) = if v >= 0.0 { (f.y(v), zero - f.y(v)) } else { (zero, f.y(v) - zero) };
            let _ = writeln!(
                out,
                r#"<rect x="{:.1}" y="{top:.1}" width="{bar:.1}" height="{h:.1}" fill="{}"/>"#,
                gx + bar * s as f64,
                PALETTE[s % PALETTE.len()]
            );
        }
        let (tx, ty) = (gx + group * 0.4, f.y0 + f.h + 12.0);
        let _ = writeln!(
            out,
            r#"<text x="{tx:.1}" y="{ty:.1}" font-size="10" text-anchor="end" transform="rotate(-45 {tx:.1} {ty:.1})">{}</text>"#,
            escape(name)
        );
    }
    let names: Vec<&str> = series.iter().map(|s| s.0).collect();
    legend(&mut out, &names, width - RIGHT - 80.0, TOP + 14.0);
    out.push_str("</svg>\n");
    out
}

/// The pairwise projections (PC1-PC2, PC1-PC3, PC2-PC3) of an embedding,
/// side by side. Points are joined in sample order.
pub fn projections(title: &str, coords: &[Vec<f64>]) -> String {
    let dims = coords.iter().map(Vec::len).min().unwrap_or(0);
    let pairs: Vec<(usize, usize)> = [(0, 1), (0, 2), (1, 2)].into_iter().filter(|&(_, b)| b < dims).collect();
    let pairs = if pairs.is_empty() && dims == 1 { vec![(0, 0)] } else { pairs };
    let panel = 300.0;
    let width = 20.0 + panel * pairs.len().max(1) as f64;
    let height = panel + 30.0;
    let mut out = String::new();
    open(&mut out, width, height, title);
    let n = coords.len().max(2) as f64;
    for (p, &(a, b)) in pairs.iter().enumerate() {
        let f = Frame {
            x0: 10.0 + panel * p as f64 + 45.0,
            y0: 45.0,
            w: panel - 70.0,
            h: panel - 70.0,
            xr: span(coords.iter().map(|c| c[a])),
            yr: span(coords.iter().map(|c| c[b])),
        };
        f.axes(&mut out, &format!("PC{}", a + 1), &format!("PC{}", b + 1), 2);
        let pts: Vec<String> = coords.iter().map(|c| format!("{:.2},{:.2}", f.x(c[a]), f.y(c[b]))).collect();
        let _ = writeln!(
            out,
            r##"<polyline fill="none" stroke="#bbb" stroke-width="0.8" points="{}"/>"##,
            pts.join(" ")
        );
        for (i, c) in coords.iter().enumerate() {
            // hue walks once around the wheel over the sample order
            let hue = 360.0 * i as f64 / n;
            let _ = writeln!(
                out,
                r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="hsl({hue:.0},70%,45%)"/>"#,
                f.x(c[a]),
                f.y(c[b])
            );
        }
    }
    out.push_str("</svg>\n");
    out
}
