//! Minimal SVG heatmaps for slope surfaces: a fixed two-color ramp over
//! [0, vmax] and an optional transition-curve overlay.

use std::fmt::Write as _;
use std::path::Path;

use ssr_core::contraction::SlopeSurface;

use crate::error::{Error, Result};

const DARK: (f64, f64, f64) = (26.0, 42.0, 108.0);
const BRIGHT: (f64, f64, f64) = (247.0, 233.0, 103.0);

fn color(value: f64, vmax: f64) -> String {
    let t = (value / vmax).clamp(0.0, 1.0);
    let r = DARK.0 + t * (BRIGHT.0 - DARK.0);
    let g = DARK.1 + t * (BRIGHT.1 - DARK.1);
    let b = DARK.2 + t * (BRIGHT.2 - DARK.2);
    format!("rgb({},{},{})", r.round(), g.round(), b.round())
}

/// Renders `surface` with columns on the x axis and rows on the y axis
/// (larger row values at the top). `transition` maps a column coordinate to
/// the predicted row coordinate of the regime boundary.
pub fn write_heatmap_svg(
    path: &Path,
    surface: &SlopeSurface,
    vmax: f64,
    title: &str,
    x_label: &str,
    y_label: &str,
    transition: Option<&dyn Fn(f64) -> f64>,
) -> Result<()> {
    let (width, height) = (640.0, 480.0);
    let (ml, mr, mt, mb) = (70.0, 20.0, 40.0, 50.0);
    let plot_w = width - ml - mr;
    let plot_h = height - mt - mb;
    let nr = surface.row_log10.len();
    let nc = surface.col_log10.len();
    let rmin = surface.row_log10[0];
    let rmax = surface.row_log10[nr - 1];
    let cmin = surface.col_log10[0];
    let cmax = surface.col_log10[nc - 1];
    let x_of = |c: f64| ml + (c - cmin) / (cmax - cmin) * plot_w;
    let y_of = |r: f64| mt + (rmax - r) / (rmax - rmin) * plot_h;

    let cell_w = plot_w / nc as f64;
    let cell_h = plot_h / nr as f64;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(
        svg,
        r#"<rect width="{width}" height="{height}" fill="white"/>"#
    );
    for (i, _) in surface.row_log10.iter().enumerate() {
        for (j, _) in surface.col_log10.iter().enumerate() {
            let x = ml + j as f64 * cell_w;
            // Row 0 is the smallest value, drawn at the bottom.
            let y = mt + (nr - 1 - i) as f64 * cell_h;
            let _ = writeln!(
                svg,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                x,
                y,
                cell_w + 0.5,
                cell_h + 0.5,
                color(surface.slopes[(i, j)], vmax)
            );
        }
    }
    if let Some(f) = transition {
        let mut pts = Vec::new();
        for step in 0..=100 {
            let c = cmin + (cmax - cmin) * step as f64 / 100.0;
            let r = f(c);
            if r >= rmin && r <= rmax {
                pts.push(format!("{:.2},{:.2}", x_of(c), y_of(r)));
            }
        }
        if pts.len() > 1 {
            let _ = writeln!(
                svg,
                r#"<polyline points="{}" fill="none" stroke="white" stroke-width="2" stroke-dasharray="6,4"/>"#,
                pts.join(" ")
            );
        }
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="24" font-family="monospace" font-size="15">{}</text>"#,
        ml,
        title
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" font-family="monospace" font-size="13" text-anchor="middle">{}</text>"#,
        ml + plot_w / 2.0,
        height - 12.0,
        x_label
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.1}" font-family="monospace" font-size="13" transform="rotate(-90 16 {:.1})" text-anchor="middle">{}</text>"#,
        mt + plot_h / 2.0,
        mt + plot_h / 2.0,
        y_label
    );
    for (v, anchor) in [(cmin, "start"), (cmax, "end")] {
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-family="monospace" font-size="11" text-anchor="{anchor}">{v}</text>"#,
            x_of(v),
            mt + plot_h + 16.0
        );
    }
    for v in [rmin, rmax] {
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-family="monospace" font-size="11" text-anchor="end">{v}</text>"#,
            ml - 6.0,
            y_of(v) + 4.0
        );
    }
    let _ = writeln!(svg, "</svg>");
    std::fs::write(path, svg).map_err(|e| Error::io(path, e))
}
