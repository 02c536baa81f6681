//! Minimal SVG output for the experiment grid and power curves.

use std::fmt::Write;

use crate::anchors::PowerCurve;
use crate::experiment::{CellSummary, ExperimentConfig};
use crate::stats::BoxStats;

const PANEL_W: f64 = 260.0;
const PANEL_H: f64 = 180.0;
const MARGIN: f64 = 40.0;
const CLEAN: &str = "#2ca02c";
const NOISY: &str = "#7b3fa0";

fn header(out: &mut String, w: f64, h: f64) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="10">"#
    );
    let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
}

fn hline(out: &mut String, x0: f64, x1: f64, y: f64, color: &str, dashed: bool) {
    let dash = if dashed { r#" stroke-dasharray="4 3""# } else { "" };
    let _ = writeln!(
        out,
        r#"<line x1="{x0:.2}" y1="{y:.2}" x2="{x1:.2}" y2="{y:.2}" stroke="{color}"{dash}/>"#
    );
}

fn draw_box(out: &mut String, cx: f64, half: f64, b: &BoxStats, y: &dyn Fn(f64) -> f64, color: &str) {
    if !b.q2.is_finite() {
        return;
    }
    let clamp = |v: f64| v.clamp(0.0, 1.0);
    let (lo, hi) = (y(clamp(b.whisker_lo)), y(clamp(b.whisker_hi)));
    let (q1, q2, q3) = (y(b.q1), y(b.q2), y(b.q3));
    let _ = writeln!(
        out,
        r#"<line x1="{cx:.2}" y1="{lo:.2}" x2="{cx:.2}" y2="{hi:.2}" stroke="{color}"/>"#
    );
    let _ = writeln!(
        out,
        r#"<rect x="{:.2}" y="{q3:.2}" width="{:.2}" height="{:.2}" fill="{color}" fill-opacity="0.35" stroke="{color}"/>"#,
        cx - half,
        2.0 * half,
        (q1 - q3).max(0.5)
    );
    hline(out, cx - half, cx + half, q2, color, false);
}

/// Box-plot panels of clean and noisy p-values for one (α, β) pair:
/// rows are N, columns are δ, and k runs along each panel's x-axis.
pub fn box_panels(config: &ExperimentConfig, cells: &[CellSummary], alpha: f64, beta: f64) -> String {
    let rows = config.n_grid.len();
    let cols = config.delta_grid.len();
    let width = cols as f64 * (PANEL_W + MARGIN) + MARGIN;
    let height = rows as f64 * (PANEL_H + MARGIN) + 2.0 * MARGIN;
    let mut out = String::new();
    header(&mut out, width, height);
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="20" text-anchor="middle" font-size="13">alpha = {alpha}, beta = {beta}</text>"#,
        width / 2.0
    );

    for (r, &n) in config.n_grid.iter().enumerate() {
        for (c, &delta) in config.delta_grid.iter().enumerate() {
            let x0 = MARGIN + c as f64 * (PANEL_W + MARGIN);
            let y0 = 2.0 * MARGIN + r as f64 * (PANEL_H + MARGIN);
            let y = move |p: f64| y0 + PANEL_H * (1.0 - p);
            let _ = writeln!(
                out,
                r##"<rect x="{x0:.2}" y="{y0:.2}" width="{PANEL_W}" height="{PANEL_H}" fill="none" stroke="#888"/>"##
            );
            let _ = writeln!(
                out,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">N = {n}, delta = {delta}</text>"#,
                x0 + PANEL_W / 2.0,
                y0 - 6.0
            );
            for (tick, label) in [(0.0, "0"), (0.5, "0.5"), (1.0, "1")] {
                let _ = writeln!(
                    out,
                    r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{label}</text>"#,
                    x0 - 4.0,
                    y(tick) + 3.0
                );
            }
            hline(&mut out, x0, x0 + PANEL_W, y(0.05), "#1f77b4", true);
            hline(&mut out, x0, x0 + PANEL_W, y(0.10), "#d62728", true);

            let slot = PANEL_W / config.k_grid.len() as f64;
            for (i, &k) in config.k_grid.iter().enumerate() {
                let cx = x0 + slot * (i as f64 + 0.5);
                let found = cells.iter().find(|s| {
                    s.cell.n == n
                        && s.cell.k == k
                        && s.cell.alpha == alpha
                        && s.cell.beta == beta
                        && s.cell.delta == delta
                });
                if let Some(s) = found {
                    let half = slot * 0.18;
                    draw_box(&mut out, cx - slot * 0.2, half, &s.clean_box, &y, CLEAN);
                    draw_box(&mut out, cx + slot * 0.2, half, &s.noisy_box, &y, NOISY);
                }
                let _ = writeln!(
                    out,
                    r#"<text x="{cx:.2}" y="{:.2}" text-anchor="middle">{k}</text>"#,
                    y0 + PANEL_H + 12.0
                );
            }
        }
    }
    out.push_str("</svg>\n");
    out
}

/// Power against β - α, one polyline per k.
pub fn power_curves(curves: &[PowerCurve]) -> String {
    let (w, h) = (480.0, 340.0);
    let (x0, y0, pw, ph) = (50.0, 20.0, 400.0, 280.0);
    let mut out = String::new();
    header(&mut out, w, h);
    let _ = writeln!(
        out,
        r##"<rect x="{x0}" y="{y0}" width="{pw}" height="{ph}" fill="none" stroke="#888"/>"##
    );
    let gmax = curves
        .iter()
        .flat_map(|c| c.gaps.iter().copied())
        .fold(0.0_f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let palette = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2"];
    for (i, curve) in curves.iter().enumerate() {
        let color = palette[i % palette.len()];
        let pts: Vec<String> = curve
            .gaps
            .iter()
            .zip(&curve.power)
            .map(|(&g, &p)| format!("{:.2},{:.2}", x0 + pw * g / gmax, y0 + ph * (1.0 - p)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" points="{}"/>"#,
            pts.join(" ")
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" fill="{color}">k = {}</text>"#,
            x0 + pw - 50.0,
            y0 + ph - 12.0 * (curves.len() - i) as f64,
            curve.k
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">beta - alpha</text>"#,
        x0 + pw / 2.0,
        h - 8.0
    );
    let _ = writeln!(out, r#"<text x="12" y="{:.2}">power</text>"#, y0 + ph / 2.0);
    out.push_str("</svg>\n");
    out
}
