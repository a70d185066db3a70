//! Bayesian semi-supervised regression: label model, likelihood potential,
//! and closed-form Gaussian posterior.
//!
//! Labels follow the generative model `Y = U H^T + gamma * eta` with
//! standard Gaussian noise. Combined with the graph Matern prior the
//! posterior over each row is Gaussian with shared covariance
//!
//! ```text
//! C* = (C_tau^{-1} + B / gamma^2)^{-1},     u*_m = C* H^T y_m / gamma^2.
//! ```
//!
//! `C*` is never formed through the precision side. We work in the prior
//! eigenbasis with the covariance-form (Woodbury) update: writing
//! `R = Lambda^{1/2} Phi_Z'^T` (an N x J matrix) with thin SVD
//! `R = U~ diag(s) V^T` and `mu = s^2`, every posterior quantity reduces to
//! shrinkage factors `gamma^2 / (gamma^2 + mu_i)` on the data directions.
//! Traces and bias vectors are assembled from explicit residual vectors, so
//! no large cancellation occurs even at `tau^2 ~ 1e-15` where the precision
//! eigenvalues overflow any useful range.
//!
//! `H` and `B = H^T H` are kept as an index list; products with them are
//! gather/scatter operations.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::graph::Clustering;
use crate::spectral::{PriorModel, SetFunctions};

/// Ordered list of labeled vertex ids; implicitly defines the selection
/// operator `H` and the diagonal mask `B = H^T H`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSet {
    indices: Vec<usize>,
    n: usize,
}

impl LabelSet {
    pub fn new(indices: Vec<usize>, n: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::NoLabels);
        }
        let mut seen = vec![false; n];
        for &z in &indices {
            if z >= n {
                return Err(Error::LabelOutOfRange { index: z, n });
            }
            if seen[z] {
                return Err(Error::DuplicateLabel { index: z });
            }
            seen[z] = true;
        }
        Ok(Self { indices, n })
    }

    pub fn count(&self) -> usize {
        self.indices.len()
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// Checks that every cluster contains at least one labeled vertex.
    pub fn check_cluster_coverage(&self, clustering: &Clustering) -> Result<()> {
        if clustering.vertex_count() != self.n {
            return Err(Error::ClusteringSize {
                expected: self.n,
                found: clustering.vertex_count(),
            });
        }
        let mut covered = vec![false; clustering.cluster_count()];
        for &z in &self.indices {
            covered[clustering.id_of(z) - 1] = true;
        }
        match covered.iter().position(|c| !c) {
            Some(k) => Err(Error::ClusterWithoutLabel { cluster: k + 1 }),
            None => Ok(()),
        }
    }

    /// Restriction `H v`: the labeled entries of `v` in label order.
    pub fn gather(&self, v: nalgebra::DVectorView<'_, f64>) -> DVector<f64> {
        DVector::from_iterator(self.count(), self.indices.iter().map(|&z| v[z]))
    }
}

/// Ground-truth rows, one per class.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    rows: DMatrix<f64>,
}

impl GroundTruth {
    pub fn new(rows: DMatrix<f64>) -> Self {
        Self { rows }
    }

    /// Rows set to the weighted set functions (the perfectly clustered
    /// ground truth).
    pub fn from_set_functions(setfns: &SetFunctions) -> Self {
        Self {
            rows: setfns.as_matrix().transpose(),
        }
    }

    pub fn class_count(&self) -> usize {
        self.rows.nrows()
    }

    pub fn vertex_count(&self) -> usize {
        self.rows.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.rows
    }

    /// Certifies that every row lies in the span of the set functions, up to
    /// `tol` in Euclidean norm.
    pub fn certify_in_span(&self, setfns: &SetFunctions, tol: f64) -> Result<()> {
        for m in 0..self.class_count() {
            let row = self.rows.row(m).transpose();
            let residual = (&row - setfns.project(&row)).norm();
            if residual > tol {
                return Err(Error::TruthOutsideSpan { row: m, residual });
            }
        }
        Ok(())
    }
}

/// Noisy labels `Y` (one column per labeled vertex) with their noise level.
#[derive(Debug, Clone, PartialEq)]
pub struct Observations {
    y: DMatrix<f64>,
    gamma: f64,
}

impl Observations {
    pub fn new(y: DMatrix<f64>, gamma: f64) -> Result<Self> {
        if !(gamma >= 0.0) {
            return Err(Error::NegativeGamma(gamma));
        }
        Ok(Self { y, gamma })
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.y
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn class_count(&self) -> usize {
        self.y.nrows()
    }

    pub fn label_count(&self) -> usize {
        self.y.ncols()
    }
}

/// Draws `Y = U H^T + gamma * eta` with `eta` standard normal, row by row.
pub fn generate_labels<R: Rng + ?Sized>(
    truth: &GroundTruth,
    labels: &LabelSet,
    gamma: f64,
    rng: &mut R,
) -> Result<Observations> {
    if !(gamma >= 0.0) {
        return Err(Error::NegativeGamma(gamma));
    }
    if labels.vertex_count() != truth.vertex_count() {
        return Err(Error::Shape(format!(
            "labels defined on {} vertices, truth on {}",
            labels.vertex_count(),
            truth.vertex_count()
        )));
    }
    let m = truth.class_count();
    let j = labels.count();
    let mut y = DMatrix::zeros(m, j);
    for row in 0..m {
        for (col, &z) in labels.indices().iter().enumerate() {
            let xi: f64 = rng.sample(StandardNormal);
            y[(row, col)] = truth.as_matrix()[(row, z)] + gamma * xi;
        }
    }
    Observations::new(y, gamma)
}

/// Likelihood potential `|U H^T - Y|_F^2 / (2 gamma^2)`.
pub fn likelihood_potential(
    u: &DMatrix<f64>,
    obs: &Observations,
    labels: &LabelSet,
) -> Result<f64> {
    if obs.gamma() <= 0.0 {
        return Err(Error::NonPositiveGamma(obs.gamma()));
    }
    if u.nrows() != obs.class_count() || obs.label_count() != labels.count() {
        return Err(Error::Shape(format!(
            "potential shapes: U {}x{}, Y {}x{}, J = {}",
            u.nrows(),
            u.ncols(),
            obs.class_count(),
            obs.label_count(),
            labels.count()
        )));
    }
    let mut acc = 0.0;
    for m in 0..u.nrows() {
        for (c, &z) in labels.indices().iter().enumerate() {
            let d = u[(m, z)] - obs.as_matrix()[(m, c)];
            acc += d * d;
        }
    }
    Ok(acc / (2.0 * obs.gamma() * obs.gamma()))
}

/// Shared posterior machinery: the covariance-form update in the prior
/// eigenbasis. One instance serves the posterior mean, covariance traces,
/// bias vectors, and sampling.
#[derive(Debug, Clone)]
pub(crate) struct LowRankUpdate {
    phi: DMatrix<f64>,
    lambda: DVector<f64>,
    sqrt_lambda: DVector<f64>,
    labels: Vec<usize>,
    gamma: f64,
    /// N x J data directions in the scaled eigenbasis.
    r: DMatrix<f64>,
    /// Orthonormal left singular vectors of `r`.
    u_basis: DMatrix<f64>,
    /// Right singular vectors of `r` (columns).
    v_basis: DMatrix<f64>,
    /// Squared singular values of `r`.
    mu: Vec<f64>,
    /// `u_i^T Lambda u_i` per singular direction.
    t_weights: Vec<f64>,
    /// `sum_j lambda_j |(I - U U^T) e_j|^2`, the prior mass outside the data
    /// directions, accumulated from explicit residual vectors.
    tail_trace: f64,
}

impl LowRankUpdate {
    pub(crate) fn new(model: &PriorModel, labels: &LabelSet, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) {
            return Err(Error::NonPositiveGamma(gamma));
        }
        let n = model.size();
        if labels.vertex_count() != n {
            return Err(Error::Shape(format!(
                "labels defined on {} vertices, prior on {n}",
                labels.vertex_count()
            )));
        }
        let j = labels.count();
        let phi = model.spectrum().eigenvectors().clone();
        let lambda = model.eigenvalues().clone();
        let sqrt_lambda = lambda.map(f64::sqrt);
        // r[(row, c)] = sqrt(lambda_row) * phi_row(z_c)
        let mut r = DMatrix::zeros(n, j);
        for (c, &z) in labels.indices().iter().enumerate() {
            for row in 0..n {
                r[(row, c)] = sqrt_lambda[row] * phi[(z, row)];
            }
        }
        let svd = nalgebra::SVD::try_new(r.clone(), true, true, f64::EPSILON, 100_000)
            .ok_or_else(|| Error::EigenFailure {
                detail: format!("svd of {n}x{j} data-direction matrix did not converge"),
            })?;
        let u_basis = svd.u.expect("u requested");
        let v_basis = svd.v_t.expect("v requested").transpose();
        let mu: Vec<f64> = svd.singular_values.iter().map(|s| s * s).collect();
        let rank = mu.len();
        for m in &mu {
            if !(gamma * gamma + m).is_finite() || gamma * gamma + m <= 0.0 {
                return Err(Error::SingularInnerSystem { j });
            }
        }
        let mut t_weights = Vec::with_capacity(rank);
        for i in 0..rank {
            let col = u_basis.column(i);
            let mut acc = 0.0;
            for row in 0..n {
                acc += lambda[row] * col[row] * col[row];
            }
            t_weights.push(acc);
        }
        // Residual of each eigen coordinate against the data directions,
        // computed as an explicit vector so the squared norm keeps full
        // relative accuracy when it is tiny.
        let mut tail_trace = 0.0;
        let mut resid = DVector::zeros(n);
        for coord in 0..n {
            let row = u_basis.row(coord);
            resid.fill(0.0);
            for i in 0..rank {
                let c = row[i];
                resid.axpy(-c, &u_basis.column(i).into_owned(), 1.0);
            }
            resid[coord] += 1.0;
            tail_trace += lambda[coord] * resid.norm_squared();
        }
        Ok(Self {
            phi,
            lambda,
            sqrt_lambda,
            labels: labels.indices().to_vec(),
            gamma,
            r,
            u_basis,
            v_basis,
            mu,
            t_weights,
            tail_trace,
        })
    }

    pub(crate) fn vertex_count(&self) -> usize {
        self.phi.nrows()
    }

    pub(crate) fn gamma(&self) -> f64 {
        self.gamma
    }

    fn g2(&self) -> f64 {
        self.gamma * self.gamma
    }

    /// Shrinkage factors `d_i = gamma^2 / (gamma^2 + mu_i)`.
    fn shrinkage(&self) -> Vec<f64> {
        let g2 = self.g2();
        self.mu.iter().map(|m| g2 / (g2 + m)).collect()
    }

    /// `Tr(C*)` as a sum of positive parts: shrunk data directions plus the
    /// prior mass orthogonal to them.
    pub(crate) fn trace_covariance(&self) -> f64 {
        let head: f64 = self
            .shrinkage()
            .iter()
            .zip(&self.t_weights)
            .map(|(d, t)| d * t)
            .sum();
        head + self.tail_trace
    }

    /// `Tr(C* B C*) / gamma^2 = gamma^2 sum_i mu_i t_i / (gamma^2 + mu_i)^2`.
    pub(crate) fn variance_trace(&self) -> f64 {
        let g2 = self.g2();
        self.mu
            .iter()
            .zip(&self.t_weights)
            .map(|(m, t)| g2 * m * t / ((g2 + m) * (g2 + m)))
            .sum()
    }

    /// Eigen-domain coordinates `Phi^T v` of a vertex-domain vector.
    pub(crate) fn eigen_coordinates(&self, v: nalgebra::DVectorView<'_, f64>) -> DVector<f64> {
        self.phi.transpose() * v
    }

    /// Eigen-domain image of `C* H^T c / gamma^2 = Lambda^{1/2} R A^{-1} c`.
    pub(crate) fn mean_response_eigen(&self, c: &DVector<f64>) -> DVector<f64> {
        let g2 = self.g2();
        let mut w = self.v_basis.transpose() * c;
        for (i, m) in self.mu.iter().enumerate() {
            w[i] /= g2 + m;
        }
        let y = &self.v_basis * w;
        let mut z = &self.r * y;
        z.component_mul_assign(&self.sqrt_lambda);
        z
    }

    /// Posterior mean row for observed values `y` (vertex domain).
    pub(crate) fn posterior_mean_row(&self, y: &DVector<f64>) -> DVector<f64> {
        &self.phi * self.mean_response_eigen(y)
    }

    /// Squared bias `|C* B u / gamma^2 - u|^2` of one ground-truth row,
    /// computed as an explicit eigen-domain residual.
    pub(crate) fn bias_sq_row(&self, truth_row: nalgebra::DVectorView<'_, f64>) -> f64 {
        let c = DVector::from_iterator(
            self.labels.len(),
            self.labels.iter().map(|&z| truth_row[z]),
        );
        let response = self.mean_response_eigen(&c);
        let truth_eigen = self.phi.transpose() * truth_row;
        (response - truth_eigen).norm_squared()
    }

    /// Lower bound on the smallest eigenvalue of `C*`.
    pub(crate) fn min_covariance_eigenvalue(&self) -> f64 {
        let min_lambda = self.lambda.iter().cloned().fold(f64::INFINITY, f64::min);
        let min_d = self
            .shrinkage()
            .into_iter()
            .fold(1.0_f64, f64::min);
        min_lambda * min_d
    }

    /// Dense `C* = Phi Lambda^{1/2} (I - U (1 - d) U^T) Lambda^{1/2} Phi^T`.
    pub(crate) fn covariance_dense(&self) -> DMatrix<f64> {
        let n = self.vertex_count();
        let d = self.shrinkage();
        let mut mid = DMatrix::identity(n, n);
        for (i, di) in d.iter().enumerate() {
            let col = self.u_basis.column(i).into_owned();
            let scale = 1.0 - di;
            mid -= scale * &col * col.transpose();
        }
        for i in 0..n {
            for j in 0..n {
                mid[(i, j)] *= self.sqrt_lambda[i] * self.sqrt_lambda[j];
            }
        }
        &self.phi * mid * self.phi.transpose()
    }

    /// One draw from `N(mean_row, C*)` using the symmetric factor
    /// `Phi Lambda^{1/2} (I - U (1 - sqrt(d)) U^T)`.
    pub(crate) fn sample_row<R: Rng + ?Sized>(
        &self,
        mean_row: &DVector<f64>,
        rng: &mut R,
    ) -> DVector<f64> {
        let n = self.vertex_count();
        let d = self.shrinkage();
        let mut xi = DVector::zeros(n);
        for v in xi.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let mut w = self.u_basis.transpose() * &xi;
        for (i, di) in d.iter().enumerate() {
            w[i] *= 1.0 - di.sqrt();
        }
        xi -= &self.u_basis * w;
        xi.component_mul_assign(&self.sqrt_lambda);
        mean_row + &self.phi * xi
    }
}

/// Gaussian posterior: per-row means and the shared covariance in
/// covariance-form factors.
#[derive(Debug, Clone)]
pub struct Posterior {
    mean: DMatrix<f64>,
    core: LowRankUpdate,
}

impl Posterior {
    pub fn mean(&self) -> &DMatrix<f64> {
        &self.mean
    }

    pub fn class_count(&self) -> usize {
        self.mean.nrows()
    }

    pub fn vertex_count(&self) -> usize {
        self.mean.ncols()
    }

    pub fn gamma(&self) -> f64 {
        self.core.gamma()
    }

    pub fn trace_covariance(&self) -> f64 {
        self.core.trace_covariance()
    }

    /// Dense shared covariance; materialized on demand.
    pub fn covariance_dense(&self) -> DMatrix<f64> {
        self.core.covariance_dense()
    }
}

/// Closed-form posterior from prior, label set, and observations. The mean
/// is assembled row by row, so computing rows separately gives identical
/// results.
pub fn posterior(
    model: &PriorModel,
    labels: &LabelSet,
    obs: &Observations,
) -> Result<Posterior> {
    if obs.label_count() != labels.count() {
        return Err(Error::Shape(format!(
            "observations have {} columns, label set has {}",
            obs.label_count(),
            labels.count()
        )));
    }
    let core = LowRankUpdate::new(model, labels, obs.gamma())?;
    let m = obs.class_count();
    let n = model.size();
    let mut mean = DMatrix::zeros(m, n);
    for row in 0..m {
        let y = obs.as_matrix().row(row).transpose();
        let u = core.posterior_mean_row(&y);
        mean.row_mut(row).copy_from(&u.transpose());
    }
    Ok(Posterior { mean, core })
}

/// Draws `count` posterior samples, each an M x N matrix with independent
/// rows `N(u*_m, C*)`.
pub fn sample_posterior<R: Rng + ?Sized>(
    post: &Posterior,
    count: usize,
    rng: &mut R,
) -> Result<Vec<DMatrix<f64>>> {
    let min_eig = post.core.min_covariance_eigenvalue();
    if !(min_eig > 0.0) {
        return Err(Error::CovarianceIndefinite {
            min_eigenvalue: min_eig,
        });
    }
    let m = post.class_count();
    let n = post.vertex_count();
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut draw = DMatrix::zeros(m, n);
        for row in 0..m {
            let mean_row = post.mean.row(row).transpose();
            let sample = post.core.sample_row(&mean_row, rng);
            draw.row_mut(row).copy_from(&sample.transpose());
        }
        out.push(draw);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{self, WeightMatrix};
    use crate::spectral::{self, prior_covariance};
    use crate::test_util;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Two vertices joined by a unit edge, tau = alpha = 1, label at vertex 0.
    fn two_vertex_model() -> (PriorModel, LabelSet) {
        let w = WeightMatrix::new(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])).unwrap();
        let l = graph::degree_and_laplacian(&w, 0.0).unwrap();
        let spectrum = spectral::eigendecompose(&l).unwrap();
        let model = prior_covariance(&spectrum, 1.0, 1.0).unwrap();
        let labels = LabelSet::new(vec![0], 2).unwrap();
        (model, labels)
    }

    #[test]
    fn label_set_validation() {
        assert!(matches!(LabelSet::new(vec![], 3), Err(Error::NoLabels)));
        assert!(matches!(
            LabelSet::new(vec![3], 3),
            Err(Error::LabelOutOfRange { .. })
        ));
        assert!(matches!(
            LabelSet::new(vec![1, 1], 3),
            Err(Error::DuplicateLabel { .. })
        ));
        let labels = LabelSet::new(vec![2, 0], 3).unwrap();
        assert_eq!(labels.count(), 2);
    }

    #[test]
    fn cluster_coverage() {
        let clustering = Clustering::contiguous(&[2, 2]).unwrap();
        let ok = LabelSet::new(vec![0, 3], 4).unwrap();
        ok.check_cluster_coverage(&clustering).unwrap();
        let missing = LabelSet::new(vec![0, 1], 4).unwrap();
        assert!(matches!(
            missing.check_cluster_coverage(&clustering),
            Err(Error::ClusterWithoutLabel { cluster: 2 })
        ));
    }

    #[test]
    fn noiseless_labels_restrict_truth() {
        let truth = GroundTruth::new(DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]));
        let labels = LabelSet::new(vec![2, 0], 3).unwrap();
        let obs = generate_labels(&truth, &labels, 0.0, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(
            obs.as_matrix(),
            &DMatrix::from_row_slice(2, 2, &[3.0, 1.0, 6.0, 4.0])
        );
    }

    #[test]
    fn labels_deterministic_per_seed() {
        let truth = GroundTruth::new(DMatrix::from_element(1, 4, 0.5));
        let labels = LabelSet::new(vec![0, 2], 4).unwrap();
        let a = generate_labels(&truth, &labels, 1.0, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = generate_labels(&truth, &labels, 1.0, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a.as_matrix(), b.as_matrix());
    }

    #[test]
    fn label_noise_variance_matches_gamma() {
        let truth = GroundTruth::new(DMatrix::from_element(1, 2, 1.0));
        let labels = LabelSet::new(vec![0], 2).unwrap();
        let gamma = 0.7;
        let samples = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut acc = 0.0;
        for _ in 0..samples {
            let obs = generate_labels(&truth, &labels, gamma, &mut rng).unwrap();
            let d = obs.as_matrix()[(0, 0)] - 1.0;
            acc += d * d;
        }
        let est = acc / samples as f64;
        let var = gamma * gamma;
        let stderr = var * (2.0 / samples as f64).sqrt();
        assert!((est - var).abs() <= 3.0 * stderr, "estimate {est} vs {var}");
    }

    #[test]
    fn potential_basics() {
        let labels = LabelSet::new(vec![1], 3).unwrap();
        let obs = Observations::new(DMatrix::from_element(1, 1, 2.0), 1.0).unwrap();
        let matching = DMatrix::from_row_slice(1, 3, &[9.0, 2.0, 9.0]);
        assert_eq!(likelihood_potential(&matching, &obs, &labels).unwrap(), 0.0);
        let off = DMatrix::from_row_slice(1, 3, &[0.0, 3.0, 0.0]);
        assert_relative_eq!(
            likelihood_potential(&off, &obs, &labels).unwrap(),
            0.5,
            max_relative = 1e-15
        );
        let obs2 = Observations::new(DMatrix::from_element(1, 1, 2.0), 2.0).unwrap();
        assert_relative_eq!(
            likelihood_potential(&off, &obs2, &labels).unwrap(),
            0.125,
            max_relative = 1e-15
        );
        let degenerate = Observations::new(DMatrix::from_element(1, 1, 2.0), 0.0).unwrap();
        assert!(likelihood_potential(&off, &degenerate, &labels).is_err());
    }

    #[test]
    fn worked_two_vertex_posterior() {
        let (model, labels) = two_vertex_model();
        let c_tau = model.covariance_dense();
        let expected_prior = DMatrix::from_row_slice(
            2,
            2,
            &[2.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 2.0 / 3.0],
        );
        assert!((c_tau - expected_prior).amax() < 1e-12);

        let y = 1.3;
        let obs = Observations::new(DMatrix::from_element(1, 1, y), 1.0).unwrap();
        let post = posterior(&model, &labels, &obs).unwrap();
        let cov = post.covariance_dense();
        let expected_cov = DMatrix::from_row_slice(2, 2, &[0.4, 0.2, 0.2, 0.6]);
        assert!((cov - expected_cov).amax() < 1e-10);
        assert_relative_eq!(post.mean()[(0, 0)], 0.4 * y, max_relative = 1e-10);
        assert_relative_eq!(post.mean()[(0, 1)], 0.2 * y, max_relative = 1e-10);
    }

    #[test]
    fn large_gamma_recovers_prior() {
        let (model, labels) = two_vertex_model();
        let obs = Observations::new(DMatrix::from_element(1, 1, 1.0), 1e6).unwrap();
        let post = posterior(&model, &labels, &obs).unwrap();
        let diff = post.covariance_dense() - model.covariance_dense();
        assert!(diff.amax() < 1e-6);
        assert!(post.mean().amax() < 1e-6);
    }

    #[test]
    fn small_gamma_interpolates_data() {
        let (model, _) = two_vertex_model();
        let labels = LabelSet::new(vec![0, 1], 2).unwrap();
        let y = DMatrix::from_row_slice(1, 2, &[0.9, -0.4]);
        let obs = Observations::new(y.clone(), 1e-6).unwrap();
        let post = posterior(&model, &labels, &obs).unwrap();
        for c in 0..2 {
            assert_relative_eq!(post.mean()[(0, c)], y[(0, c)], max_relative = 1e-6);
        }
    }

    #[test]
    fn covariance_form_matches_precision_form() {
        for seed in 0..6 {
            let inst = test_util::random_instance(seed);
            let post = posterior(&inst.model, &inst.labels, &inst.obs).unwrap();
            let dense = post.covariance_dense();
            let oracle = test_util::precision_form_covariance(&inst.model, &inst.labels, inst.gamma);
            let rel = (dense - &oracle).norm() / oracle.norm();
            assert!(rel < 1e-8, "seed {seed}: relative error {rel:e}");
        }
    }

    #[test]
    fn mask_identity_holds() {
        // (1/gamma^2) C* B = I - C* C_tau^{-1} on well-conditioned instances.
        for seed in 0..4 {
            let inst = test_util::random_instance(seed);
            let post = posterior(&inst.model, &inst.labels, &inst.obs).unwrap();
            let cov = post.covariance_dense();
            let n = inst.model.size();
            let g2 = inst.gamma * inst.gamma;
            let mut lhs = DMatrix::zeros(n, n);
            for &z in inst.labels.indices() {
                let col = cov.column(z).into_owned() / g2;
                lhs.column_mut(z).copy_from(&col);
            }
            let phi = inst.model.spectrum().eigenvectors();
            let prec =
                phi * DMatrix::from_diagonal(&inst.model.precision_eigenvalues()) * phi.transpose();
            let rhs = DMatrix::identity(n, n) - &cov * prec;
            let rel = (&lhs - &rhs).norm() / rhs.norm().max(1.0);
            assert!(rel < 1e-8, "seed {seed}: identity residual {rel:e}");
        }
    }

    #[test]
    fn rows_decouple_exactly() {
        let inst = test_util::random_instance(11);
        let post = posterior(&inst.model, &inst.labels, &inst.obs).unwrap();
        for m in 0..inst.obs.class_count() {
            let single = Observations::new(
                DMatrix::from_rows(&[inst.obs.as_matrix().row(m)]),
                inst.gamma,
            )
            .unwrap();
            let row_post = posterior(&inst.model, &inst.labels, &single).unwrap();
            assert_eq!(row_post.mean().row(0), post.mean().row(m));
        }
    }

    #[test]
    fn posterior_mean_minimizes_objective() {
        let inst = test_util::random_instance(3);
        let post = posterior(&inst.model, &inst.labels, &inst.obs).unwrap();
        let objective = |u: &DMatrix<f64>| {
            let potential = likelihood_potential(u, &inst.obs, &inst.labels).unwrap();
            let phi = inst.model.spectrum().eigenvectors();
            let prec = inst.model.precision_eigenvalues();
            let mut quad = 0.0;
            for m in 0..u.nrows() {
                let coeffs = phi.transpose() * u.row(m).transpose();
                for j in 0..coeffs.len() {
                    quad += prec[j] * coeffs[j] * coeffs[j];
                }
            }
            potential + 0.5 * quad
        };
        let at_mean = objective(post.mean());
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..20 {
            let noise = DMatrix::from_fn(post.class_count(), post.vertex_count(), |_, _| {
                let v: f64 = rng.sample(StandardNormal);
                0.1 * v
            });
            let perturbed = post.mean() + noise;
            assert!(objective(&perturbed) >= at_mean - 1e-10);
        }
    }

    #[test]
    fn sampling_moments_match_posterior() {
        let (model, labels) = two_vertex_model();
        let obs = Observations::new(DMatrix::from_element(1, 1, 0.8), 1.0).unwrap();
        let post = posterior(&model, &labels, &obs).unwrap();
        assert!(sample_posterior(&post, 0, &mut ChaCha8Rng::seed_from_u64(2))
            .unwrap()
            .is_empty());

        let count = 100_000;
        let draws = sample_posterior(&post, count, &mut ChaCha8Rng::seed_from_u64(13)).unwrap();
        let cov = post.covariance_dense();
        let mut mean0 = 0.0;
        let mut cov01 = 0.0;
        for d in &draws {
            mean0 += d[(0, 0)];
            cov01 += (d[(0, 0)] - post.mean()[(0, 0)]) * (d[(0, 1)] - post.mean()[(0, 1)]);
        }
        mean0 /= count as f64;
        cov01 /= count as f64;
        let se_mean = (cov[(0, 0)] / count as f64).sqrt();
        assert!(
            (mean0 - post.mean()[(0, 0)]).abs() <= 3.0 * se_mean,
            "mean estimate {mean0}"
        );
        let se_cov =
            ((cov[(0, 0)] * cov[(1, 1)] + cov[(0, 1)] * cov[(0, 1)]) / count as f64).sqrt();
        assert!(
            (cov01 - cov[(0, 1)]).abs() <= 3.0 * se_cov,
            "covariance estimate {cov01} vs {}",
            cov[(0, 1)]
        );
    }

    #[test]
    fn truth_certificate() {
        let degrees = DVector::from_vec(vec![1.0, 1.0, 1.0, 1.0]);
        let clustering = Clustering::contiguous(&[2, 2]).unwrap();
        let sf = spectral::set_functions(&degrees, &clustering, 0.0).unwrap();
        let good = GroundTruth::from_set_functions(&sf);
        good.certify_in_span(&sf, 1e-8).unwrap();
        let bad = GroundTruth::new(DMatrix::from_row_slice(1, 4, &[1.0, -1.0, 0.0, 0.0]));
        assert!(matches!(
            bad.certify_in_span(&sf, 1e-8),
            Err(Error::TruthOutsideSpan { row: 0, .. })
        ));
    }
}
