//! Exact and Monte-Carlo evaluation of the posterior contraction functional,
//! its three-term decomposition, and log-log slope surfaces.
//!
//! For ground truth `U` (rows `u_m`), label mask `B`, and posterior
//! covariance `C*`, the contraction functional decomposes exactly as
//!
//! ```text
//! I = M Tr(C*) + (M / gamma^2) Tr(C* B C*) + sum_m |C* B u_m / gamma^2 - u_m|^2
//! ```
//!
//! The three ingredients are evaluated through the covariance-form factors of
//! [`crate::inference`]; in particular the bias vector is
//! `C* B u / gamma^2 - u = C_tau H^T (gamma^2 I + H C_tau H^T)^{-1} H u - u`,
//! assembled as an explicit residual so the inverse prior never appears.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::inference::{generate_labels, GroundTruth, LabelSet, LowRankUpdate};
use crate::spectral::PriorModel;

/// The contraction functional and its exact decomposition, with the
/// hyperparameters echoed.
#[derive(Debug, Clone)]
pub struct ContractionReport {
    /// `M Tr(C*)`.
    pub trace_term: f64,
    /// `(M / gamma^2) Tr(C* B C*)`.
    pub variance_term: f64,
    /// `sum_m |C* B u_m / gamma^2 - u_m|^2`.
    pub bias_term: f64,
    /// Sum of the three terms.
    pub total: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub tau: f64,
    pub eps: Option<f64>,
}

impl ContractionReport {
    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = Some(eps);
        self
    }
}

/// Per-term diagnostics: `Tr(C*)`, `Tr(C* B C*) / gamma^2`, and the per-row
/// bias norms (not squared, not scaled by `M`).
#[derive(Debug, Clone)]
pub struct TermDiagnostics {
    pub trace: f64,
    pub variance_trace: f64,
    pub per_row_bias: Vec<f64>,
}

fn decompose(
    model: &PriorModel,
    labels: &LabelSet,
    truth: &GroundTruth,
    gamma: f64,
) -> Result<(LowRankUpdate, f64, f64, Vec<f64>)> {
    if truth.vertex_count() != model.size() {
        return Err(Error::Shape(format!(
            "truth has {} columns, prior has {}",
            truth.vertex_count(),
            model.size()
        )));
    }
    let core = LowRankUpdate::new(model, labels, gamma)?;
    let trace = core.trace_covariance();
    let variance = core.variance_trace();
    let bias_sq: Vec<f64> = (0..truth.class_count())
        .map(|m| core.bias_sq_row(truth.as_matrix().row(m).transpose().as_view()))
        .collect();
    Ok((core, trace, variance, bias_sq))
}

/// Exact contraction functional; no sampling involved.
pub fn contraction_exact(
    model: &PriorModel,
    labels: &LabelSet,
    truth: &GroundTruth,
    gamma: f64,
) -> Result<ContractionReport> {
    let (_, trace, variance, bias_sq) = decompose(model, labels, truth, gamma)?;
    let m = truth.class_count() as f64;
    let trace_term = m * trace;
    let variance_term = m * variance;
    let bias_term: f64 = bias_sq.iter().sum();
    Ok(ContractionReport {
        trace_term,
        variance_term,
        bias_term,
        total: trace_term + variance_term + bias_term,
        gamma,
        alpha: model.alpha(),
        tau: model.tau(),
        eps: None,
    })
}

/// The three ingredients exposed individually for slope studies.
pub fn term_diagnostics(
    model: &PriorModel,
    labels: &LabelSet,
    truth: &GroundTruth,
    gamma: f64,
) -> Result<TermDiagnostics> {
    let (_, trace, variance_trace, bias_sq) = decompose(model, labels, truth, gamma)?;
    Ok(TermDiagnostics {
        trace,
        variance_trace,
        per_row_bias: bias_sq.iter().map(|b| b.sqrt()).collect(),
    })
}

/// Markov bound on posterior mass outside a `delta`-ball: `total / delta^2`.
pub fn tail_bound(report: &ContractionReport, delta: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::NonPositiveDelta(delta));
    }
    Ok(report.total / (delta * delta))
}

/// Monte-Carlo estimator flavor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum McVariant {
    /// Sample labels, then one posterior draw per label sample.
    Full,
    /// Sample labels only; the inner posterior expectation is computed
    /// exactly per draw (Rao-Blackwellized).
    Rao,
}

/// Sample-mean estimate with its standard error.
#[derive(Debug, Clone)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
    pub variant: McVariant,
}

/// Nested-sampling estimate of the contraction functional.
pub fn contraction_monte_carlo<R: Rng + ?Sized>(
    model: &PriorModel,
    labels: &LabelSet,
    truth: &GroundTruth,
    gamma: f64,
    samples: usize,
    variant: McVariant,
    rng: &mut R,
) -> Result<McEstimate> {
    if samples < 2 {
        return Err(Error::TooFewSamples(samples));
    }
    let (core, trace, _, _) = decompose(model, labels, truth, gamma)?;
    let m_rows = truth.class_count();
    let truth_eigen: Vec<DVector<f64>> = (0..m_rows)
        .map(|m| core.eigen_coordinates(truth.as_matrix().row(m).transpose().as_view()))
        .collect();

    let mut count = 0usize;
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for _ in 0..samples {
        let obs = generate_labels(truth, labels, gamma, rng)?;
        let x = match variant {
            McVariant::Rao => {
                let mut acc = m_rows as f64 * trace;
                for m in 0..m_rows {
                    let y = obs.as_matrix().row(m).transpose();
                    let resp = core.mean_response_eigen(&y);
                    acc += (resp - &truth_eigen[m]).norm_squared();
                }
                acc
            }
            McVariant::Full => {
                let mut acc = 0.0;
                for m in 0..m_rows {
                    let y = obs.as_matrix().row(m).transpose();
                    let mean_row = core.posterior_mean_row(&y);
                    let draw = core.sample_row(&mean_row, rng);
                    let diff = draw - truth.as_matrix().row(m).transpose();
                    acc += diff.norm_squared();
                }
                acc
            }
        };
        count += 1;
        let delta = x - mean;
        mean += delta / count as f64;
        m2 += delta * (x - mean);
    }
    let variance = m2 / (count as f64 - 1.0);
    Ok(McEstimate {
        mean,
        stderr: (variance / count as f64).sqrt(),
        samples: count,
        variant,
    })
}

/// Rectangular grid of positive values over log-spaced axes.
#[derive(Debug, Clone)]
pub struct SlopeGrid {
    row_log10: Vec<f64>,
    col_log10: Vec<f64>,
    values: DMatrix<f64>,
}

impl SlopeGrid {
    /// `values[(i, j)]` sits at `(row_log10[i], col_log10[j])`. Axes must be
    /// strictly increasing.
    pub fn new(row_log10: Vec<f64>, col_log10: Vec<f64>, values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() != row_log10.len() || values.ncols() != col_log10.len() {
            return Err(Error::NonRectangularGrid {
                detail: format!(
                    "values are {}x{}, axes are {}x{}",
                    values.nrows(),
                    values.ncols(),
                    row_log10.len(),
                    col_log10.len()
                ),
            });
        }
        for (axis, name) in [(&row_log10, "row"), (&col_log10, "col")] {
            for i in 1..axis.len() {
                if !(axis[i] > axis[i - 1]) {
                    return Err(Error::GridNotMonotone {
                        axis: name,
                        position: i,
                    });
                }
            }
        }
        Ok(Self {
            row_log10,
            col_log10,
            values,
        })
    }

    pub fn row_log10(&self) -> &[f64] {
        &self.row_log10
    }

    pub fn col_log10(&self) -> &[f64] {
        &self.col_log10
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }
}

/// Axis along which a slope surface differentiates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridAxis {
    Row,
    Col,
}

/// Per-cell logarithmic slopes of a grid along one axis.
#[derive(Debug, Clone)]
pub struct SlopeSurface {
    pub row_log10: Vec<f64>,
    pub col_log10: Vec<f64>,
    pub slopes: DMatrix<f64>,
    pub axis: GridAxis,
}

/// Numerically differentiates `log10(values)` along `axis`: central
/// differences in the interior, one-sided at the boundaries.
pub fn slope_surface(grid: &SlopeGrid, axis: GridAxis) -> Result<SlopeSurface> {
    let (nr, nc) = (grid.row_log10.len(), grid.col_log10.len());
    let along = match axis {
        GridAxis::Row => nr,
        GridAxis::Col => nc,
    };
    if along < 3 {
        return Err(Error::GridTooSmall {
            axis: match axis {
                GridAxis::Row => "row",
                GridAxis::Col => "col",
            },
            len: along,
        });
    }
    let mut logv = DMatrix::zeros(nr, nc);
    for i in 0..nr {
        for j in 0..nc {
            let v = grid.values[(i, j)];
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::NonPositiveGridValue {
                    row: i,
                    col: j,
                    value: v,
                });
            }
            logv[(i, j)] = v.log10();
        }
    }
    let mut slopes = DMatrix::zeros(nr, nc);
    for i in 0..nr {
        for j in 0..nc {
            let (lo, hi, xlo, xhi) = match axis {
                GridAxis::Row => {
                    let lo = i.saturating_sub(1);
                    let hi = (i + 1).min(nr - 1);
                    (logv[(lo, j)], logv[(hi, j)], grid.row_log10[lo], grid.row_log10[hi])
                }
                GridAxis::Col => {
                    let lo = j.saturating_sub(1);
                    let hi = (j + 1).min(nc - 1);
                    (logv[(i, lo)], logv[(i, hi)], grid.col_log10[lo], grid.col_log10[hi])
                }
            };
            slopes[(i, j)] = (hi - lo) / (xhi - xlo);
        }
    }
    Ok(SlopeSurface {
        row_log10: grid.row_log10.clone(),
        col_log10: grid.col_log10.clone(),
        slopes,
        axis,
    })
}
