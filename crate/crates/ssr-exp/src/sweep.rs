//! The parameter sweep: for every grid cell `(eps, gamma, alpha)` assemble
//! the perturbed graph, build the prior with the coupling
//! `tau = eps^{1 / max(2, 2 alpha)}`, evaluate the exact contraction
//! decomposition, and derive log-log slope surfaces.
//!
//! Cells are independent pure computations; the runner parallelizes over
//! `eps` (one eigendecomposition each) and sorts rows by grid position, so
//! output is identical regardless of scheduling. Per-cell failures land in
//! the row's `error` field and the run continues.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use ssr_core::contraction::{
    contraction_exact, contraction_monte_carlo, slope_surface, GridAxis, McVariant, SlopeGrid,
    SlopeSurface,
};
use ssr_core::graph::{self, Clustering, PerturbationFamily, WeightMatrix};
use ssr_core::inference::{GroundTruth, LabelSet};
use ssr_core::spectral::{eigendecompose, prior_covariance, set_functions};

use crate::error::{Error, Result};
use crate::seed::derive_seed;

/// Cells whose shift `tau^2` falls below this multiple of `sigma_max` sit at
/// the double-precision floor of the eigenvalue shift and get flagged.
pub const FLOOR_RATIO: f64 = 1e-14;

/// Grid specification for a sweep. Axis values are `log10` exponents in the
/// order they were requested (typically descending from 1e-1).
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub eps_log10: Vec<f64>,
    pub gamma_log10: Vec<f64>,
    pub alphas: Vec<f64>,
    /// Laplacian normalization exponent.
    pub p: f64,
    pub seed: u64,
    /// Rao-Blackwellized cross-check sample count for a subsample of cells.
    pub mc_check: Option<usize>,
    /// Random label choice per cluster instead of the lowest index.
    pub label_seed: Option<u64>,
}

impl SweepSpec {
    /// Quarter-decade grids over eps in [1e-15, 1e-1] and gamma in
    /// [10^-7.5, 1e-1], normalized Laplacian.
    pub fn default_grids(alphas: Vec<f64>, seed: u64) -> Self {
        Self {
            eps_log10: decade_grid(-1.0, -15.0, 0.25),
            gamma_log10: decade_grid(-1.0, -7.5, 0.25),
            alphas,
            p: 0.5,
            seed,
            mc_check: None,
            label_seed: None,
        }
    }
}

/// Log10 grid from `start` to `stop` (inclusive, either direction) with
/// positive decade step.
pub fn decade_grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    assert!(step > 0.0, "decade step must be positive");
    let span = (stop - start).abs();
    let count = (span / step).round() as usize + 1;
    let dir = if stop >= start { 1.0 } else { -1.0 };
    (0..count).map(|i| start + dir * step * i as f64).collect()
}

/// Parses a `start:stop:step` decade range, e.g. `-1:-15:0.25`.
pub fn parse_decades(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::GridSpec {
            spec: spec.to_string(),
            detail: "expected start:stop:step".into(),
        });
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| {
            p.trim().parse::<f64>().map_err(|_| Error::GridSpec {
                spec: spec.to_string(),
                detail: format!("cannot parse {p:?}"),
            })
        })
        .collect::<Result<_>>()?;
    if !(nums[2] > 0.0) {
        return Err(Error::GridSpec {
            spec: spec.to_string(),
            detail: "step must be positive".into(),
        });
    }
    Ok(decade_grid(nums[0], nums[1], nums[2]))
}

/// Input data for a sweep: either a perturbation family (synthetic route)
/// or a fixed graph whose inter-cluster edges are scaled by eps (MNIST
/// route).
#[derive(Debug, Clone)]
pub enum SweepDataset {
    Perturbation {
        family: PerturbationFamily,
        clustering: Clustering,
    },
    InterclusterScaled {
        weights: WeightMatrix,
        clustering: Clustering,
    },
}

impl SweepDataset {
    pub fn clustering(&self) -> &Clustering {
        match self {
            SweepDataset::Perturbation { clustering, .. }
            | SweepDataset::InterclusterScaled { clustering, .. } => clustering,
        }
    }

    pub fn vertex_count(&self) -> usize {
        match self {
            SweepDataset::Perturbation { family, .. } => family.size(),
            SweepDataset::InterclusterScaled { weights, .. } => weights.size(),
        }
    }

    /// The decoupled (eps = 0) weight matrix defining the set functions.
    pub fn base_weights(&self) -> Result<WeightMatrix> {
        match self {
            SweepDataset::Perturbation { family, .. } => Ok(family.base().clone()),
            SweepDataset::InterclusterScaled {
                weights,
                clustering,
            } => Ok(graph::scale_intercluster(weights, clustering, 0.0)?),
        }
    }

    pub fn assemble(&self, eps: f64) -> Result<WeightMatrix> {
        match self {
            SweepDataset::Perturbation { family, .. } => {
                Ok(graph::assemble_perturbed(family, eps)?)
            }
            SweepDataset::InterclusterScaled {
                weights,
                clustering,
            } => Ok(graph::scale_intercluster(weights, clustering, eps)?),
        }
    }
}

/// One sweep cell.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub eps: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub tau: f64,
    pub trace_term: f64,
    pub variance_term: f64,
    pub bias_term: f64,
    pub total: f64,
    /// Set when `tau^2 < 1e-14 * sigma_max`: the eigenvalue shift is below
    /// the double-precision floor for this cell.
    pub floor_flag: bool,
    pub error: Option<String>,
}

/// Oracle cross-check on one cell.
#[derive(Debug, Clone)]
pub struct McCheckRow {
    pub eps: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub exact: f64,
    pub mc_mean: f64,
    pub mc_stderr: f64,
    pub z: f64,
}

/// Slope surfaces for one alpha, present when every cell of that alpha
/// succeeded with a positive total.
#[derive(Debug, Clone)]
pub struct AlphaSurfaces {
    pub alpha: f64,
    pub c_eps: SlopeSurface,
    pub c_gamma: SlopeSurface,
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub rows: Vec<SweepRow>,
    pub mc_rows: Vec<McCheckRow>,
    pub surfaces: Vec<AlphaSurfaces>,
    pub labels: LabelSet,
}

/// Coupling exponent `max(2, 2 alpha)`.
pub fn coupling_exponent(alpha: f64) -> f64 {
    (2.0 * alpha).max(2.0)
}

/// One labeled vertex per cluster: lowest index by default, uniform with a
/// seed otherwise.
pub fn choose_labels(
    clustering: &Clustering,
    label_seed: Option<u64>,
) -> Result<LabelSet> {
    use rand::Rng;
    let mut rng = label_seed.map(ChaCha8Rng::seed_from_u64);
    let mut indices = Vec::with_capacity(clustering.cluster_count());
    for k in 0..clustering.cluster_count() {
        let members = clustering.members(k);
        let pick = match rng.as_mut() {
            Some(r) => members[r.random_range(0..members.len())],
            None => members[0],
        };
        indices.push(pick);
    }
    let labels = LabelSet::new(indices, clustering.vertex_count())?;
    labels.check_cluster_coverage(clustering)?;
    Ok(labels)
}

struct CellOutcome {
    e_idx: usize,
    g_idx: usize,
    a_idx: usize,
    row: SweepRow,
    mc: Option<McCheckRow>,
}

/// Runs the full grid. Rows come back sorted by (eps, gamma, alpha) grid
/// position, one row per cell, errors recorded inline.
pub fn run_sweep(spec: &SweepSpec, data: &SweepDataset) -> Result<SweepOutput> {
    let clustering = data.clustering();
    let labels = choose_labels(clustering, spec.label_seed)?;
    let base = data.base_weights()?;
    let setfns = set_functions(base.degrees(), clustering, spec.p)?;
    let truth = GroundTruth::from_set_functions(&setfns);

    let n_gamma = spec.gamma_log10.len();
    let n_alpha = spec.alphas.len();
    let total_cells = spec.eps_log10.len() * n_gamma * n_alpha;
    let mc_stride = spec
        .mc_check
        .map(|_| (total_cells / 12).max(1) as u64);

    let mut outcomes: Vec<CellOutcome> = spec
        .eps_log10
        .par_iter()
        .enumerate()
        .flat_map_iter(|(e_idx, &eps_l10)| {
            let eps = 10f64.powf(eps_l10);
            let mut cells = Vec::with_capacity(n_gamma * n_alpha);
            let prepared = data.assemble(eps).and_then(|w| {
                let l = graph::degree_and_laplacian(&w, spec.p)?;
                let spectrum = eigendecompose(&l)?;
                Ok(spectrum)
            });
            match prepared {
                Err(err) => {
                    let msg = err.to_string();
                    for (a_idx, &alpha) in spec.alphas.iter().enumerate() {
                        let tau = eps.powf(1.0 / coupling_exponent(alpha));
                        for (g_idx, &g_l10) in spec.gamma_log10.iter().enumerate() {
                            cells.push(CellOutcome {
                                e_idx,
                                g_idx,
                                a_idx,
                                row: SweepRow {
                                    eps,
                                    gamma: 10f64.powf(g_l10),
                                    alpha,
                                    tau,
                                    trace_term: f64::NAN,
                                    variance_term: f64::NAN,
                                    bias_term: f64::NAN,
                                    total: f64::NAN,
                                    floor_flag: false,
                                    error: Some(msg.clone()),
                                },
                                mc: None,
                            });
                        }
                    }
                }
                Ok(spectrum) => {
                    let sigma_max = spectrum.eigenvalue(spectrum.len() - 1);
                    for (a_idx, &alpha) in spec.alphas.iter().enumerate() {
                        let tau = eps.powf(1.0 / coupling_exponent(alpha));
                        let floor_flag = tau * tau < FLOOR_RATIO * sigma_max;
                        let model = prior_covariance(&spectrum, tau, alpha);
                        for (g_idx, &g_l10) in spec.gamma_log10.iter().enumerate() {
                            let gamma = 10f64.powf(g_l10);
                            let cell_index =
                                ((e_idx * n_gamma + g_idx) * n_alpha + a_idx) as u64;
                            let outcome = model.as_ref().map_err(|e| e.to_string()).and_then(
                                |m| {
                                    contraction_exact(m, &labels, &truth, gamma)
                                        .map_err(|e| e.to_string())
                                },
                            );
                            let (row, mc) = match outcome {
                                Ok(report) => {
                                    let mc = match (spec.mc_check, mc_stride) {
                                        (Some(s), Some(stride))
                                            if cell_index % stride == 0 =>
                                        {
                                            let mut rng = ChaCha8Rng::seed_from_u64(
                                                derive_seed(spec.seed, cell_index),
                                            );
                                            contraction_monte_carlo(
                                                model.as_ref().expect("model ok"),
                                                &labels,
                                                &truth,
                                                gamma,
                                                s,
                                                McVariant::Rao,
                                                &mut rng,
                                            )
                                            .ok()
                                            .map(|est| McCheckRow {
                                                eps,
                                                gamma,
                                                alpha,
                                                exact: report.total,
                                                mc_mean: est.mean,
                                                mc_stderr: est.stderr,
                                                z: if est.stderr > 0.0 {
                                                    (est.mean - report.total) / est.stderr
                                                } else {
                                                    0.0
                                                },
                                            })
                                        }
                                        _ => None,
                                    };
                                    (
                                        SweepRow {
                                            eps,
                                            gamma,
                                            alpha,
                                            tau,
                                            trace_term: report.trace_term,
                                            variance_term: report.variance_term,
                                            bias_term: report.bias_term,
                                            total: report.total,
                                            floor_flag,
                                            error: None,
                                        },
                                        mc,
                                    )
                                }
                                Err(msg) => (
                                    SweepRow {
                                        eps,
                                        gamma,
                                        alpha,
                                        tau,
                                        trace_term: f64::NAN,
                                        variance_term: f64::NAN,
                                        bias_term: f64::NAN,
                                        total: f64::NAN,
                                        floor_flag,
                                        error: Some(msg),
                                    },
                                    None,
                                ),
                            };
                            cells.push(CellOutcome {
                                e_idx,
                                g_idx,
                                a_idx,
                                row,
                                mc,
                            });
                        }
                    }
                }
            }
            cells.into_iter()
        })
        .collect();

    outcomes.sort_by_key(|c| (c.e_idx, c.g_idx, c.a_idx));
    let mut rows = Vec::with_capacity(outcomes.len());
    let mut mc_rows = Vec::new();
    for c in outcomes {
        if let Some(mc) = c.mc {
            mc_rows.push(mc);
        }
        rows.push(c.row);
    }

    let mut surfaces = Vec::new();
    for &alpha in &spec.alphas {
        if let Ok(grid) = total_grid(&rows, alpha) {
            if let (Ok(c_eps), Ok(c_gamma)) = (
                slope_surface(&grid, GridAxis::Row),
                slope_surface(&grid, GridAxis::Col),
            ) {
                surfaces.push(AlphaSurfaces {
                    alpha,
                    c_eps,
                    c_gamma,
                });
            }
        }
    }

    Ok(SweepOutput {
        rows,
        mc_rows,
        surfaces,
        labels,
    })
}

/// Field of a sweep row to lay out on a grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueField {
    Total,
    Trace,
    Variance,
    Bias,
}

impl ValueField {
    pub fn get(self, row: &SweepRow) -> f64 {
        match self {
            ValueField::Total => row.total,
            ValueField::Trace => row.trace_term,
            ValueField::Variance => row.variance_term,
            ValueField::Bias => row.bias_term,
        }
    }
}

fn grid_for(rows: &[SweepRow], alpha: f64, field: ValueField, tau_axis: bool) -> Result<SlopeGrid> {
    let mut eps_axis: Vec<f64> = Vec::new();
    let mut gamma_axis: Vec<f64> = Vec::new();
    for r in rows.iter().filter(|r| r.alpha == alpha) {
        let le = r.eps.log10();
        let lg = r.gamma.log10();
        if !eps_axis.iter().any(|v| (v - le).abs() < 1e-9) {
            eps_axis.push(le);
        }
        if !gamma_axis.iter().any(|v| (v - lg).abs() < 1e-9) {
            gamma_axis.push(lg);
        }
    }
    if eps_axis.is_empty() {
        return Err(Error::Invalid(format!("no rows for alpha = {alpha}")));
    }
    eps_axis.sort_by(|a, b| a.partial_cmp(b).unwrap());
    gamma_axis.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let find = |axis: &[f64], v: f64| {
        axis.iter()
            .position(|x| (x - v).abs() < 1e-9)
            .expect("axis value present")
    };
    let mut values = DMatrix::from_element(eps_axis.len(), gamma_axis.len(), f64::NAN);
    let mut count = 0usize;
    for r in rows.iter().filter(|r| r.alpha == alpha) {
        if r.error.is_some() {
            return Err(Error::Invalid(format!(
                "cell (eps = {}, gamma = {}) failed: {}",
                r.eps,
                r.gamma,
                r.error.as_deref().unwrap_or("")
            )));
        }
        let i = find(&eps_axis, r.eps.log10());
        let j = find(&gamma_axis, r.gamma.log10());
        values[(i, j)] = field.get(r);
        count += 1;
    }
    if count != eps_axis.len() * gamma_axis.len() {
        return Err(Error::Invalid(format!(
            "grid for alpha = {alpha} is not rectangular: {count} cells for {}x{}",
            eps_axis.len(),
            gamma_axis.len()
        )));
    }
    let row_axis = if tau_axis {
        let ex = coupling_exponent(alpha);
        eps_axis.iter().map(|v| v / ex).collect()
    } else {
        eps_axis
    };
    Ok(SlopeGrid::new(row_axis, gamma_axis, values)?)
}

/// Rectangular grid of the contraction total for one alpha, rows indexed by
/// `log10(eps)` ascending.
pub fn total_grid(rows: &[SweepRow], alpha: f64) -> Result<SlopeGrid> {
    grid_for(rows, alpha, ValueField::Total, false)
}

/// Grid of an arbitrary term, rows indexed by `log10(eps)`.
pub fn value_grid(rows: &[SweepRow], alpha: f64, field: ValueField) -> Result<SlopeGrid> {
    grid_for(rows, alpha, field, false)
}

/// Grid of an arbitrary term with rows indexed by `log10(tau)` under the
/// sweep coupling.
pub fn value_grid_tau(rows: &[SweepRow], alpha: f64, field: ValueField) -> Result<SlopeGrid> {
    grid_for(rows, alpha, field, true)
}
