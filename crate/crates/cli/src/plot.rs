//! Minimal SVG line plots rendered from CSV text.
//!
//! Plots are computed from the CSV itself, never from in-memory values, so
//! regenerating a plot from an archived CSV reproduces it exactly.

use std::fmt::Write;

use anyhow::{anyhow, bail, Result};

const W: f64 = 640.0;
const H: f64 = 400.0;
const MARGIN: f64 = 56.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Line plot of columns `ys` against column `x` of `csv_text`.
///
/// With `err` set, that column is drawn as vertical error bars on the first
/// series.
pub fn svg_from_csv(csv_text: &str, x: &str, ys: &[&str], err: Option<&str>, title: &str) -> Result<String> {
    let mut r = csv::Reader::from_reader(csv_text.as_bytes());
    let header = r.headers()?.clone();
    let col = |name: &str| header.iter().position(|h| h == name).ok_or_else(|| anyhow!("no column {name:?}"));
    let xi = col(x)?;
    let yi: Vec<usize> = ys.iter().map(|y| col(y)).collect::<Result<_>>()?;
    let ei = err.map(col).transpose()?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        rows.push(rec.iter().map(|v| v.parse::<f64>()).collect::<Result<_, _>>()?);
    }
    if rows.is_empty() {
        bail!("no data rows to plot");
    }

    let xs: Vec<f64> = rows.iter().map(|r| r[xi]).collect();
    let (x0, x1) = padded_range(xs.iter().copied());
    let e = |r: &Vec<f64>| ei.map_or(0.0, |i| r[i]);
    let (y0, y1) = padded_range(
        rows.iter().flat_map(|r| yi.iter().flat_map(move |&i| [r[i] - e(r), r[i] + e(r)])).chain([0.0, 1.0]),
    );
    let px = |v: f64| MARGIN + (v - x0) / (x1 - x0) * (W - 2.0 * MARGIN);
    let py = |v: f64| H - MARGIN - (v - y0) / (y1 - y0) * (H - 2.0 * MARGIN);

    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#)?;
    writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#)?;
    writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="15">{}</text>"#, W / 2.0, escape(title))?;
    let (left, right, top, bottom) = (MARGIN, W - MARGIN, MARGIN, H - MARGIN);
    writeln!(s, r#"<path d="M{left} {top} V{bottom} H{right}" stroke="black" fill="none"/>"#)?;
    for k in 0..=4 {
        let fx = x0 + (x1 - x0) * k as f64 / 4.0;
        let fy = y0 + (y1 - y0) * k as f64 / 4.0;
        writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-family="sans-serif" font-size="11">{}</text>"#, px(fx), bottom + 16.0, tick(fx))?;
        writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end" font-family="sans-serif" font-size="11">{}</text>"#, left - 6.0, py(fy) + 4.0, tick(fy))?;
    }
    writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12">{}</text>"#, W / 2.0, H - 12.0, escape(x))?;

    for (n, (&i, name)) in yi.iter().zip(ys).enumerate() {
        let color = COLORS[n % COLORS.len()];
        let pts: Vec<String> = rows.iter().map(|r| format!("{:.2},{:.2}", px(r[xi]), py(r[i]))).collect();
        writeln!(s, r#"<polyline points="{}" stroke="{color}" stroke-width="1.5" fill="none"/>"#, pts.join(" "))?;
        if n == 0 {
            if let Some(ei) = ei {
                for r in &rows {
                    let (cx, lo, hi) = (px(r[xi]), py(r[i] - r[ei]), py(r[i] + r[ei]));
                    writeln!(s, r#"<path d="M{cx:.2} {lo:.2} V{hi:.2}" stroke="{color}"/>"#)?;
                    writeln!(s, r#"<circle cx="{cx:.2}" cy="{:.2}" r="2.5" fill="{color}"/>"#, py(r[i]))?;
                }
            }
        }
        let ly = top + 14.0 * n as f64;
        writeln!(s, r#"<text x="{:.1}" y="{ly:.1}" font-family="sans-serif" font-size="11" fill="{color}">{}</text>"#, right - 110.0, escape(name))?;
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn padded_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if hi - lo < 1e-300 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.04 * (hi - lo);
    (lo - pad, hi + pad)
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
