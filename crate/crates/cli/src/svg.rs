//! Two-panel trajectory plot in the θ-plane, written as plain SVG elements.

use std::fmt::Write;

use semiot::trainer::counterexample::{THETA_STAR, Y1, Y2};

const PANEL: f64 = 360.0;
const MARGIN: f64 = 48.0;

struct Frame {
    lo: [f64; 2],
    span: f64,
    x0: f64,
}

impl Frame {
    fn map(&self, p: [f64; 2]) -> (f64, f64) {
        let u = (p[0] - self.lo[0]) / self.span;
        let v = (p[1] - self.lo[1]) / self.span;
        (self.x0 + MARGIN + u * PANEL, MARGIN + (1.0 - v) * PANEL)
    }
}

/// Square data window covering every point plus the atoms, with 8% padding.
fn bounds(points: &[[f64; 2]]) -> ([f64; 2], f64) {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in points.iter().chain([&Y1, &Y2, &THETA_STAR]) {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-9) * 1.16;
    let center = [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0];
    ([center[0] - span / 2.0, center[1] - span / 2.0], span)
}

fn tick_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag)
}

fn panel(out: &mut String, traj: &[[f64; 2]], x0: f64, title: &str, color: &str) {
    let (lo, span) = bounds(traj);
    let f = Frame { lo, span, x0 };
    let _ = writeln!(
        out,
        r##"<rect x="{:.1}" y="{MARGIN:.1}" width="{PANEL:.1}" height="{PANEL:.1}" fill="none" stroke="#444"/>"##,
        x0 + MARGIN
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="14">{title}</text>"#,
        x0 + MARGIN + PANEL / 2.0,
        MARGIN - 14.0
    );
    let step = tick_step(span);
    for axis in 0..2 {
        let mut t = (lo[axis] / step).ceil() * step;
        while t <= lo[axis] + span {
            let label = format!("{}", (t / step).round() * step);
            let label = if label == "-0" { "0".to_string() } else { label };
            if axis == 0 {
                let (x, _) = f.map([t, lo[1]]);
                let y = MARGIN + PANEL;
                let _ = writeln!(
                    out,
                    r##"<line x1="{x:.1}" y1="{y:.1}" x2="{x:.1}" y2="{:.1}" stroke="#444"/><text x="{x:.1}" y="{:.1}" text-anchor="middle" font-size="10">{label}</text>"##,
                    y + 5.0,
                    y + 17.0
                );
            } else {
                let (_, y) = f.map([lo[0], t]);
                let x = x0 + MARGIN;
                let _ = writeln!(
                    out,
                    r##"<line x1="{x:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#444"/><text x="{:.1}" y="{:.1}" text-anchor="end" font-size="10">{label}</text>"##,
                    x - 5.0,
                    x - 7.0,
                    y + 3.5
                );
            }
            t += step;
        }
    }
    let pts: Vec<String> = traj
        .iter()
        .map(|p| {
            let (x, y) = f.map(*p);
            format!("{x:.2},{y:.2}")
        })
        .collect();
    let _ = writeln!(
        out,
        r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.2" stroke-opacity="0.8"/>"#,
        pts.join(" ")
    );
    if let Some(first) = traj.first() {
        let (x, y) = f.map(*first);
        let _ = writeln!(
            out,
            r#"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="{color}"/><text x="{:.2}" y="{:.2}" font-size="11">θ⁰</text>"#,
            x + 5.0,
            y - 5.0
        );
    }
    for (p, name) in [(Y1, "y₁"), (Y2, "y₂")] {
        let (x, y) = f.map(p);
        let _ = writeln!(
            out,
            r##"<circle cx="{x:.2}" cy="{y:.2}" r="5" fill="#222"/><text x="{:.2}" y="{:.2}" font-size="12">{name}</text>"##,
            x + 7.0,
            y + 4.0
        );
    }
    let (x, y) = f.map(THETA_STAR);
    let _ = writeln!(
        out,
        r##"<path d="M{:.2},{:.2}L{:.2},{:.2}M{:.2},{:.2}L{:.2},{:.2}" stroke="#c00" stroke-width="2"/><text x="{:.2}" y="{:.2}" font-size="12" fill="#c00">θ*</text>"##,
        x - 5.0,
        y - 5.0,
        x + 5.0,
        y + 5.0,
        x - 5.0,
        y + 5.0,
        x + 5.0,
        y - 5.0,
        x + 7.0,
        y + 4.0
    );
}

/// Left: unregularized trajectory; right: regularized with `lambda`.
pub fn figure(unreg: &[[f64; 2]], reg: &[[f64; 2]], lambda: f64) -> String {
    let width = 2.0 * (PANEL + 2.0 * MARGIN);
    let height = PANEL + 2.0 * MARGIN;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    panel(&mut out, unreg, 0.0, "λ = 0", "#1f5fbf");
    panel(
        &mut out,
        reg,
        PANEL + 2.0 * MARGIN,
        &format!("λ = {lambda}"),
        "#2a8f3a",
    );
    out.push_str("</svg>\n");
    out
}
