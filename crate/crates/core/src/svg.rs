//! Static SVG figures. Coordinates are printed with a fixed number of
//! decimals so identical inputs give identical bytes.

use std::fmt::Write as _;

use crate::geometry::Polygon;

const SIZE: f64 = 480.0;
/// Half-width of the drawn window in body coordinates.
const HALF: f64 = 0.6;

fn to_px(x: f64, y: f64) -> (f64, f64) {
    let s = SIZE / (2.0 * HALF);
    ((x + HALF) * s, (HALF - y) * s)
}

fn points(p: &Polygon) -> String {
    p.vertices()
        .iter()
        .map(|v| {
            let (x, y) = to_px(v.x, v.y);
            format!("{x:.3},{y:.3}")
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn polygon(out: &mut String, p: &Polygon, style: &str) {
    if !p.is_empty() {
        let _ = writeln!(out, r#"  <polygon points="{}" {style}/>"#, points(p));
    }
}

/// Unit box, truth (black), reconstruction (red) and optionally the
/// reflected reconstruction as a dashed ghost.
pub fn overlay(truth: Option<&Polygon>, reconstruction: &Polygon, ghost: bool) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(out, r#"  <rect width="{SIZE}" height="{SIZE}" fill="white"/>"#);
    polygon(&mut out, &Polygon::unit_square(), r##"fill="none" stroke="#bbbbbb" stroke-width="1""##);
    if let Some(t) = truth {
        polygon(&mut out, t, r##"fill="none" stroke="#000000" stroke-width="2""##);
    }
    if ghost {
        polygon(
            &mut out,
            &reconstruction.reflect(),
            r##"fill="none" stroke="#d62728" stroke-width="1" stroke-dasharray="6 4""##,
        );
    }
    polygon(&mut out, reconstruction, r##"fill="none" stroke="#d62728" stroke-width="2""##);
    out.push_str("</svg>\n");
    out
}

/// Log-log plot of `(k, median error)`; non-positive values are skipped.
/// Returns `None` when nothing is plottable.
pub fn error_plot(series: &[(usize, f64)]) -> Option<String> {
    let pts: Vec<(f64, f64)> = series
        .iter()
        .filter(|&&(k, e)| k > 0 && e > 0.0 && e.is_finite())
        .map(|&(k, e)| ((k as f64).log10(), e.log10()))
        .collect();
    if pts.is_empty() {
        return None;
    }
    let (w, h, m) = (480.0, 360.0, 50.0);
    let span = |f: fn(&(f64, f64)) -> f64| {
        let lo = pts.iter().map(f).fold(f64::INFINITY, f64::min);
        let hi = pts.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
        if hi - lo < 1e-9 { (lo - 0.5, hi + 0.5) } else { (lo, hi) }
    };
    let (x0, x1) = span(|p| p.0);
    let (y0, y1) = span(|p| p.1);
    let px = |p: &(f64, f64)| {
        (
            m + (p.0 - x0) / (x1 - x0) * (w - 2.0 * m),
            h - m - (p.1 - y0) / (y1 - y0) * (h - 2.0 * m),
        )
    };
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(out, r#"  <rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r##"  <polyline points="{m},{m} {m},{b} {r},{b}" fill="none" stroke="#000000"/>"##,
        b = h - m,
        r = w - m
    );
    let line = pts
        .iter()
        .map(|p| {
            let (x, y) = px(p);
            format!("{x:.3},{y:.3}")
        })
        .collect::<Vec<_>>()
        .join(" ");
    let _ = writeln!(out, r##"  <polyline points="{line}" fill="none" stroke="#1f77b4" stroke-width="2"/>"##);
    for (p, &(k, e)) in pts.iter().zip(series.iter().filter(|&&(k, e)| k > 0 && e > 0.0 && e.is_finite())) {
        let (x, y) = px(p);
        let _ = writeln!(out, r##"  <circle cx="{x:.3}" cy="{y:.3}" r="3" fill="#1f77b4"/>"##);
        let _ = writeln!(
            out,
            r#"  <text x="{x:.3}" y="{:.3}" font-size="11" text-anchor="middle">k={k}</text>"#,
            h - m + 16.0
        );
        let _ = writeln!(
            out,
            r#"  <text x="{:.3}" y="{y:.3}" font-size="11">{e:.3e}</text>"#,
            x + 6.0
        );
    }
    let _ = writeln!(
        out,
        r#"  <text x="{:.1}" y="20" font-size="13" text-anchor="middle">median error vs k (log-log)</text>"#,
        w / 2.0
    );
    out.push_str("</svg>\n");
    Some(out)
}
