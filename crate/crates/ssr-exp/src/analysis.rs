//! Slope-surface post-processing: plateau extraction in the dominated
//! regimes, transition-band location, and fixed-eps slice shapes.
//!
//! A cell is gamma-dominated when `gamma^2 >> eps^{min(1, alpha)}` and
//! eps-dominated in the opposite case. Plateau slopes are medians over the
//! dominated regime at least one decade past the theoretical transition,
//! excluding the top decade of the differentiated axis (one-sided stencils
//! and saturation distort slopes at the grid edge) and any cells the sweep
//! flagged as sitting on the double-precision floor.

use ssr_core::contraction::{GridAxis, SlopeGrid, SlopeSurface};

/// Median of a slice of finite values.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    })
}

/// Least-squares slope of `log10(y)` against `x_log10`.
pub fn fit_loglog_slope(x_log10: &[f64], y: &[f64]) -> Option<f64> {
    if x_log10.len() != y.len() || x_log10.len() < 2 {
        return None;
    }
    if y.iter().any(|v| !(*v > 0.0)) {
        return None;
    }
    let n = x_log10.len() as f64;
    let mx = x_log10.iter().sum::<f64>() / n;
    let my = y.iter().map(|v| v.log10()).sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, v) in x_log10.iter().zip(y) {
        num += (x - mx) * (v.log10() - my);
        den += (x - mx) * (x - mx);
    }
    if den == 0.0 {
        None
    } else {
        Some(num / den)
    }
}

/// Log10 of the contraction floor `eps^{min(1, alpha)}`.
pub fn floor_log10(eps_log10: f64, alpha: f64) -> f64 {
    alpha.min(1.0) * eps_log10
}

/// Positive when the cell is gamma-dominated: `2 log10(gamma) - floor`.
pub fn gamma_margin(eps_log10: f64, gamma_log10: f64, alpha: f64) -> f64 {
    2.0 * gamma_log10 - floor_log10(eps_log10, alpha)
}

/// Median slope over the dominated regime selected by `margin` (cells more
/// than one decade past the transition), skipping the top decade of the
/// differentiated axis and any cell where `skip` is true.
pub fn plateau_median<M, S>(surface: &SlopeSurface, margin: M, skip: S) -> Option<f64>
where
    M: Fn(f64, f64) -> f64,
    S: Fn(f64, f64) -> bool,
{
    let row_top = surface.row_log10[surface.row_log10.len() - 1];
    let col_top = surface.col_log10[surface.col_log10.len() - 1];
    let mut selected = Vec::new();
    for (i, &re) in surface.row_log10.iter().enumerate() {
        for (j, &cg) in surface.col_log10.iter().enumerate() {
            if margin(re, cg) <= 1.0 || skip(re, cg) {
                continue;
            }
            let boundary = match surface.axis {
                GridAxis::Row => re > row_top - 1.0,
                GridAxis::Col => cg > col_top - 1.0,
            };
            if boundary {
                continue;
            }
            selected.push(surface.slopes[(i, j)]);
        }
    }
    median(&selected)
}

/// Median `c_gamma` over the gamma-dominated regime of a contraction
/// surface.
pub fn gamma_plateau<S: Fn(f64, f64) -> bool>(
    c_gamma: &SlopeSurface,
    alpha: f64,
    skip: S,
) -> Option<f64> {
    plateau_median(c_gamma, |re, cg| gamma_margin(re, cg, alpha), skip)
}

/// Median `c_eps` over the eps-dominated regime of a contraction surface.
pub fn eps_plateau<S: Fn(f64, f64) -> bool>(
    c_eps: &SlopeSurface,
    alpha: f64,
    skip: S,
) -> Option<f64> {
    plateau_median(c_eps, |re, cg| -gamma_margin(re, cg, alpha), skip)
}

/// Per-column transition offsets (in decades) between the empirical
/// half-plateau crossing of the row-axis slope and `predict(col_log10)`.
/// Columns whose predicted crossing falls within one decade of the grid
/// boundary are skipped.
pub fn transition_offsets<F>(surface: &SlopeSurface, plateau: f64, predict: F) -> Vec<f64>
where
    F: Fn(f64) -> f64,
{
    let rows = &surface.row_log10;
    let half = plateau / 2.0;
    let mut offsets = Vec::new();
    for (j, &cg) in surface.col_log10.iter().enumerate() {
        let predicted = predict(cg);
        if predicted < rows[0] + 1.0 || predicted > rows[rows.len() - 1] - 1.0 {
            continue;
        }
        // Slopes rise from ~0 (deep dominated-by-column side) to the plateau
        // as the row variable grows; note the last upward half-crossing.
        let mut crossing = None;
        for i in 0..rows.len() - 1 {
            let below = surface.slopes[(i, j)] < half;
            let above = surface.slopes[(i + 1, j)] >= half;
            if below && above {
                crossing = Some(0.5 * (rows[i] + rows[i + 1]));
            }
        }
        if let Some(c) = crossing {
            offsets.push((c - predicted).abs());
        }
    }
    offsets
}

/// Fixed-eps slice diagnostics: the fitted gamma-slope over the
/// gamma-dominated cells (when at least three exist) and the saturation
/// level over the eps-dominated cells.
#[derive(Debug, Clone, Copy)]
pub struct SliceShape {
    pub gamma_slope: Option<f64>,
    pub plateau_level: f64,
}

/// Analyzes one fixed-eps slice of a contraction grid: the value decays
/// like `gamma^2`, then saturates at an eps-dependent level. The fit skips
/// the top half decade of the gamma axis, where saturation bends the decay.
pub fn fixed_eps_slice(grid: &SlopeGrid, alpha: f64, eps_log10: f64) -> Option<SliceShape> {
    let i = grid
        .row_log10()
        .iter()
        .position(|v| (v - eps_log10).abs() < 1e-9)?;
    let col_top = grid.col_log10()[grid.col_log10().len() - 1];
    let mut fit_x = Vec::new();
    let mut fit_y = Vec::new();
    let mut plateau_vals = Vec::new();
    for (j, &cg) in grid.col_log10().iter().enumerate() {
        let m = gamma_margin(eps_log10, cg, alpha);
        let v = grid.values()[(i, j)];
        if m >= 1.0 && cg <= col_top - 0.5 {
            fit_x.push(cg);
            fit_y.push(v);
        } else if m <= -1.0 {
            plateau_vals.push(v);
        }
    }
    let gamma_slope = if fit_x.len() >= 3 {
        fit_loglog_slope(&fit_x, &fit_y)
    } else {
        None
    };
    Some(SliceShape {
        gamma_slope,
        plateau_level: median(&plateau_vals)?,
    })
}
