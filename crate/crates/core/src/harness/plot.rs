//! Minimal SVG rendering of aggregate series: mean line, CI error bars and a
//! shaded 5–95 percentile band. Output bytes depend only on the input.

use std::fmt::Write as _;

use super::aggregate::WindowSummary;
use crate::error::{Error, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

pub struct Series<'a> {
    pub label: &'a str,
    pub windows: &'a [WindowSummary],
}

struct Scale {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Scale {
    fn x(&self, v: f64) -> f64 {
        LEFT + (v - self.x0) / (self.x1 - self.x0) * (WIDTH - LEFT - RIGHT)
    }

    fn y(&self, v: f64) -> f64 {
        HEIGHT - BOTTOM - (v - self.y0) / (self.y1 - self.y0) * (HEIGHT - TOP - BOTTOM)
    }
}

fn tick_label(v: f64) -> String {
    if v.abs() >= 100.0 || v == v.round() {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

/// Renders one or more series against episode number (window centres).
pub fn render_svg(series: &[Series<'_>], window: usize, metric_label: &str) -> Result<String> {
    if series.iter().all(|s| s.windows.is_empty()) {
        return Err(Error::Config("nothing to plot: every series is empty".into()));
    }
    let centre = |w: &WindowSummary| (w.window_index as f64 + 0.5) * window as f64;
    let all = series.iter().flat_map(|s| s.windows.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for w in all {
        x0 = x0.min(centre(w));
        x1 = x1.max(centre(w));
        y0 = y0.min(w.p5).min(w.mean - w.ci95);
        y1 = y1.max(w.p95).max(w.mean + w.ci95);
    }
    if x1 - x0 < f64::EPSILON {
        x0 -= window as f64 / 2.0;
        x1 += window as f64 / 2.0;
    }
    let pad = if y1 - y0 < 1e-12 { 1.0 } else { 0.05 * (y1 - y0) };
    let sc = Scale { x0, x1, y0: y0 - pad, y1: y1 + pad };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let (ax, ay) = (LEFT, HEIGHT - BOTTOM);
    let _ = writeln!(s, r#"<line x1="{ax}" y1="{ay}" x2="{}" y2="{ay}" stroke="black"/>"#, WIDTH - RIGHT);
    let _ = writeln!(s, r#"<line x1="{ax}" y1="{TOP}" x2="{ax}" y2="{ay}" stroke="black"/>"#);
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let xv = sc.x0 + f * (sc.x1 - sc.x0);
        let yv = sc.y0 + f * (sc.y1 - sc.y0);
        let (px, py) = (sc.x(xv), sc.y(yv));
        let _ = writeln!(s, r#"<line x1="{px:.2}" y1="{ay}" x2="{px:.2}" y2="{:.2}" stroke="black"/>"#, ay + 5.0);
        let _ = writeln!(s, r#"<text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, ay + 18.0, tick_label(xv));
        let _ = writeln!(s, r#"<line x1="{:.2}" y1="{py:.2}" x2="{ax}" y2="{py:.2}" stroke="black"/>"#, ax - 5.0);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, ax - 8.0, py + 4.0, tick_label(yv));
    }
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">episode</text>"#, (LEFT + WIDTH - RIGHT) / 2.0, HEIGHT - 10.0);
    let _ = writeln!(
        s,
        r#"<text x="15" y="{:.2}" text-anchor="middle" transform="rotate(-90 15 {:.2})">{}</text>"#,
        (TOP + ay) / 2.0,
        (TOP + ay) / 2.0,
        escape(metric_label)
    );

    for (i, ser) in series.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let ws = ser.windows;
        if ws.is_empty() {
            continue;
        }
        let mut band = String::new();
        for w in ws {
            let _ = write!(band, "{:.2},{:.2} ", sc.x(centre(w)), sc.y(w.p95));
        }
        for w in ws.iter().rev() {
            let _ = write!(band, "{:.2},{:.2} ", sc.x(centre(w)), sc.y(w.p5));
        }
        let _ = writeln!(s, r#"<polygon points="{}" fill="{colour}" fill-opacity="0.2" stroke="none"/>"#, band.trim_end());
        for w in ws {
            let px = sc.x(centre(w));
            let _ = writeln!(
                s,
                r#"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="{colour}"/>"#,
                sc.y(w.mean - w.ci95),
                sc.y(w.mean + w.ci95)
            );
        }
        let line: Vec<String> = ws.iter().map(|w| format!("{:.2},{:.2}", sc.x(centre(w)), sc.y(w.mean))).collect();
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="2"/>"#, line.join(" "));
        for w in ws {
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{colour}"/>"#, sc.x(centre(w)), sc.y(w.mean));
        }
        let ly = TOP + 4.0 + 16.0 * i as f64;
        let _ = writeln!(s, r#"<rect x="{:.2}" y="{:.2}" width="12" height="3" fill="{colour}"/>"#, LEFT + 10.0, ly - 4.0);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{ly:.2}">{}</text>"#, LEFT + 28.0, escape(ser.label));
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}
