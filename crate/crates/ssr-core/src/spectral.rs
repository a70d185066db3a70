//! Symmetric eigendecompositions, the graph Matern prior in eigenbasis form,
//! weighted set functions, prior sampling, and perturbation diagnostics.
//!
//! The prior covariance is `C_tau = tau^{2a} (L + tau^2 I)^{-a}`. All of its
//! arithmetic (powers, inverses, square roots) happens on the eigenvalues as
//! scalars: the prior eigenvalues are
//!
//! ```text
//! lambda_j = (tau^2 / (sigma_j + tau^2))^a
//! ```
//!
//! which stay fully accurate down to `tau^2 ~ 1e-15` where any dense
//! precision-form manipulation would be hopeless. A dense `C_tau` is
//! materialized only on demand.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::graph::{Clustering, Laplacian};

/// Maximum QL iterations before the eigensolver reports failure.
const EIGEN_MAX_ITER: usize = 10_000;

/// Eigenpairs of a symmetric matrix: ascending eigenvalues, orthonormal
/// eigenvector columns, signs fixed so the first nonzero component of each
/// eigenvector is positive.
#[derive(Debug, Clone)]
pub struct Spectrum {
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn eigenvalue(&self, j: usize) -> f64 {
        self.eigenvalues[j]
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    /// Columns are eigenvectors, ordered with the eigenvalues.
    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    /// Largest deviation of `Phi^T Phi` from the identity.
    pub fn orthonormality_defect(&self) -> f64 {
        let n = self.len();
        let gram = self.eigenvectors.transpose() * &self.eigenvectors;
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((gram[(i, j)] - target).abs());
            }
        }
        worst
    }

    /// Relative Frobenius error of `sum_j sigma_j phi_j phi_j^T` against `m`.
    pub fn reconstruction_error(&self, m: &DMatrix<f64>) -> f64 {
        let rebuilt = &self.eigenvectors
            * DMatrix::from_diagonal(&self.eigenvalues)
            * self.eigenvectors.transpose();
        let denom = m.norm();
        if denom == 0.0 {
            rebuilt.norm()
        } else {
            (rebuilt - m).norm() / denom
        }
    }
}

/// Eigendecomposition of an arbitrary symmetric matrix.
pub fn symmetric_spectrum(m: &DMatrix<f64>) -> Result<Spectrum> {
    let (rows, cols) = m.shape();
    if rows != cols {
        return Err(Error::NotSquare { rows, cols });
    }
    let eig = nalgebra::SymmetricEigen::try_new(m.clone(), f64::EPSILON, EIGEN_MAX_ITER)
        .ok_or_else(|| Error::EigenFailure {
            detail: format!(
                "no convergence after {EIGEN_MAX_ITER} iterations (n = {rows}, max |entry| = {:e}, frobenius = {:e})",
                m.amax(),
                m.norm()
            ),
        })?;
    let n = rows;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .expect("finite eigenvalues")
    });
    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&j| eig.eigenvalues[j]));
    let mut eigenvectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(src);
        let flip = col.iter().find(|v| **v != 0.0).map_or(1.0, |v| v.signum());
        for i in 0..n {
            eigenvectors[(i, dst)] = flip * col[i];
        }
    }
    Ok(Spectrum {
        eigenvalues,
        eigenvectors,
    })
}

/// Eigendecomposition of a graph Laplacian, with a positive semi-definiteness
/// check on the computed spectrum.
pub fn eigendecompose(l: &Laplacian) -> Result<Spectrum> {
    let spectrum = symmetric_spectrum(l.as_matrix())?;
    let min = spectrum.eigenvalue(0);
    let max = spectrum.eigenvalue(spectrum.len() - 1).abs();
    if min < -1e-8 * max.max(1.0) {
        return Err(Error::NotPositiveSemiDefinite {
            min_eigenvalue: min,
        });
    }
    Ok(spectrum)
}

/// Spectral norm (largest absolute eigenvalue) of a symmetric matrix.
pub fn spectral_norm(m: &DMatrix<f64>) -> Result<f64> {
    let spectrum = symmetric_spectrum(m)?;
    let n = spectrum.len();
    Ok(spectrum
        .eigenvalue(0)
        .abs()
        .max(spectrum.eigenvalue(n - 1).abs()))
}

/// Graph Matern prior `C_tau = tau^{2a} (L + tau^2 I)^{-a}` held in
/// eigenbasis form.
#[derive(Debug, Clone)]
pub struct PriorModel {
    spectrum: Spectrum,
    tau: f64,
    alpha: f64,
    lambdas: DVector<f64>,
}

impl PriorModel {
    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn size(&self) -> usize {
        self.lambdas.len()
    }

    /// Prior covariance eigenvalues, non-increasing in j.
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.lambdas
    }

    /// Precision eigenvalues `1 / lambda_j`, computed in the scalar domain.
    pub fn precision_eigenvalues(&self) -> DVector<f64> {
        let t2 = self.tau * self.tau;
        DVector::from_iterator(
            self.size(),
            self.spectrum
                .eigenvalues()
                .iter()
                .map(|&sigma| ((sigma.max(0.0) + t2) / t2).powf(self.alpha)),
        )
    }

    /// Dense `C_tau`; materialized on demand only.
    pub fn covariance_dense(&self) -> DMatrix<f64> {
        let phi = self.spectrum.eigenvectors();
        phi * DMatrix::from_diagonal(&self.lambdas) * phi.transpose()
    }
}

/// Derives the prior eigenvalues from a Laplacian spectrum. Negative
/// numerical eigenvalues of `L` are clamped to zero before the power.
pub fn prior_covariance(spectrum: &Spectrum, tau: f64, alpha: f64) -> Result<PriorModel> {
    if !(tau > 0.0) {
        return Err(Error::NonPositiveTau(tau));
    }
    if !(alpha > 0.0) {
        return Err(Error::NonPositiveAlpha(alpha));
    }
    let t2 = tau * tau;
    let mut lambdas = DVector::zeros(spectrum.len());
    for (j, &sigma) in spectrum.eigenvalues().iter().enumerate() {
        let s = sigma.max(0.0);
        let lam = (t2 / (s + t2)).powf(alpha);
        if !lam.is_finite() || lam < f64::MIN_POSITIVE || lam > 1.0 {
            return Err(Error::PriorEigenvalueRange {
                sigma,
                tau,
                alpha,
            });
        }
        lambdas[j] = lam;
    }
    Ok(PriorModel {
        spectrum: spectrum.clone(),
        tau,
        alpha,
        lambdas,
    })
}

/// Unit-norm cluster indicators weighted by `D^p`: columns
/// `chi_k = D^p 1_k / |D^p 1_k|`, mutually orthogonal with disjoint support.
#[derive(Debug, Clone)]
pub struct SetFunctions {
    chi: DMatrix<f64>,
}

impl SetFunctions {
    pub fn vertex_count(&self) -> usize {
        self.chi.nrows()
    }

    pub fn count(&self) -> usize {
        self.chi.ncols()
    }

    /// N x K matrix whose k-th column is `chi_k`.
    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.chi
    }

    pub fn column(&self, k: usize) -> DVector<f64> {
        self.chi.column(k).into_owned()
    }

    /// Projection of `v` onto the span of the set functions.
    pub fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.chi * (self.chi.transpose() * v)
    }
}

/// Builds the weighted set functions from a degree vector and a clustering.
pub fn set_functions(
    degrees: &DVector<f64>,
    clustering: &Clustering,
    p: f64,
) -> Result<SetFunctions> {
    let n = degrees.len();
    if clustering.vertex_count() != n {
        return Err(Error::ClusteringSize {
            expected: n,
            found: clustering.vertex_count(),
        });
    }
    for (i, d) in degrees.iter().enumerate() {
        if *d <= 0.0 {
            return Err(Error::NonPositiveDegree {
                vertex: i,
                degree: *d,
            });
        }
    }
    let k = clustering.cluster_count();
    let mut chi = DMatrix::zeros(n, k);
    for c in 0..k {
        let mut norm_sq = 0.0;
        for &v in clustering.members(c) {
            let x = degrees[v].powf(p);
            chi[(v, c)] = x;
            norm_sq += x * x;
        }
        let norm = norm_sq.sqrt();
        for &v in clustering.members(c) {
            chi[(v, c)] /= norm;
        }
    }
    Ok(SetFunctions { chi })
}

/// Draws `m` i.i.d. rows from `N(0, C_tau)` via the eigen expansion
/// `u = sum_j sqrt(lambda_j) xi_j phi_j`.
pub fn sample_prior<R: Rng + ?Sized>(model: &PriorModel, m: usize, rng: &mut R) -> DMatrix<f64> {
    let n = model.size();
    let phi = model.spectrum.eigenvectors();
    let sqrt_lambda: Vec<f64> = model.lambdas.iter().map(|l| l.sqrt()).collect();
    let mut out = DMatrix::zeros(m, n);
    let mut coeff = DVector::zeros(n);
    for row in 0..m {
        for j in 0..n {
            let xi: f64 = rng.sample(StandardNormal);
            coeff[j] = sqrt_lambda[j] * xi;
        }
        let u = phi * &coeff;
        out.row_mut(row).copy_from(&u.transpose());
    }
    out
}

/// Comparison of the near-kernel eigenspace of a perturbed Laplacian against
/// the set functions of the unperturbed graph.
#[derive(Debug, Clone)]
pub struct PerturbReport {
    /// Squared projection residuals `|chi_k - P_eps chi_k|^2`, one per cluster.
    pub residuals: Vec<f64>,
    /// Frobenius distance between the rank-K projections.
    pub subspace_distance: f64,
    /// `sigma_{K+1}` of the perturbed Laplacian.
    pub sigma_k_plus_1: f64,
    /// Uniform spectral gap of the unperturbed Laplacian, `sigma_{K+1,0}`.
    pub theta: f64,
    /// `theta - sum_h eps^h |L^(h)|_2` when expansion norms are supplied.
    pub gap_lower_bound: Option<f64>,
}

/// Expansion data for the spectral-gap lower bound: norms of the Laplacian
/// correction terms and the perturbation size they are evaluated at.
#[derive(Debug, Clone)]
pub struct GapBound<'a> {
    pub term_norms: &'a [f64],
    pub eps: f64,
}

/// Diagnoses how far the leading `K` eigenvectors of the perturbed Laplacian
/// have drifted from the span of the set functions. Projections are compared
/// through explicit residual vectors, never through individual eigenvector
/// matching.
pub fn perturbation_diagnostics(
    spec0: &Spectrum,
    spec_eps: &Spectrum,
    setfns: &SetFunctions,
    bound: Option<GapBound<'_>>,
) -> Result<PerturbReport> {
    let n = spec_eps.len();
    let k = setfns.count();
    if spec0.len() != n || setfns.vertex_count() != n {
        return Err(Error::Shape(format!(
            "spectra and set functions disagree: {} vs {} vs {}",
            spec0.len(),
            n,
            setfns.vertex_count()
        )));
    }
    if k == 0 || k >= n {
        return Err(Error::SubspaceDimension { k, n });
    }
    let phi = spec_eps.eigenvectors();
    let mut residuals = Vec::with_capacity(k);
    for c in 0..k {
        let chi = setfns.column(c);
        let mut resid = chi.clone();
        for j in 0..k {
            let phi_j = phi.column(j);
            let coef = phi_j.dot(&chi);
            resid.axpy(-coef, &phi_j.into_owned(), 1.0);
        }
        residuals.push(resid.norm_squared());
    }
    // |P_0 - P_eps|_F^2 = 2 (K - Tr(P_0 P_eps)) = 2 * sum_k residual_k for
    // rank-K projections.
    let subspace_distance = (2.0 * residuals.iter().sum::<f64>()).max(0.0).sqrt();
    let sigma_k_plus_1 = spec_eps.eigenvalue(k);
    let theta = spec0.eigenvalue(k);
    let gap_lower_bound = bound.map(|b| {
        let mut correction = 0.0;
        for (idx, norm) in b.term_norms.iter().enumerate() {
            correction += b.eps.powi(idx as i32 + 1) * norm;
        }
        theta - correction
    });
    Ok(PerturbReport {
        residuals,
        subspace_distance,
        sigma_k_plus_1,
        theta,
        gap_lower_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{self, Clustering, PerturbationFamily, WeightMatrix};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn path_laplacian() -> Laplacian {
        let w = WeightMatrix::new(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])).unwrap();
        graph::degree_and_laplacian(&w, 0.0).unwrap()
    }

    #[test]
    fn two_vertex_spectrum() {
        let spectrum = eigendecompose(&path_laplacian()).unwrap();
        assert_relative_eq!(spectrum.eigenvalue(0), 0.0, epsilon = 1e-12);
        assert_relative_eq!(spectrum.eigenvalue(1), 2.0, max_relative = 1e-12);
        let s = 0.5_f64.sqrt();
        let phi = spectrum.eigenvectors();
        assert_relative_eq!(phi[(0, 0)], s, max_relative = 1e-12);
        assert_relative_eq!(phi[(1, 0)], s, max_relative = 1e-12);
        // Sign convention: first nonzero component positive.
        assert_relative_eq!(phi[(0, 1)], s, max_relative = 1e-12);
        assert_relative_eq!(phi[(1, 1)], -s, max_relative = 1e-12);
    }

    #[test]
    fn diagonal_matrix_sorted_with_coordinate_eigenvectors() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0, 2.0]));
        let spectrum = symmetric_spectrum(&m).unwrap();
        assert_eq!(
            spectrum.eigenvalues().as_slice(),
            &[1.0, 2.0, 3.0],
        );
        let phi = spectrum.eigenvectors();
        assert_relative_eq!(phi[(1, 0)], 1.0, max_relative = 1e-12);
        assert_relative_eq!(phi[(2, 1)], 1.0, max_relative = 1e-12);
        assert_relative_eq!(phi[(0, 2)], 1.0, max_relative = 1e-12);
    }

    #[test]
    fn random_symmetric_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let raw = DMatrix::from_fn(6, 6, |_, _| rng.random::<f64>() - 0.5);
        let m = (&raw + raw.transpose()) * 0.5;
        let spectrum = symmetric_spectrum(&m).unwrap();
        assert!(spectrum.reconstruction_error(&m) < 1e-8);
        assert!(spectrum.orthonormality_defect() < 1e-8);
    }

    #[test]
    fn determinism_for_fixed_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let raw = DMatrix::from_fn(5, 5, |_, _| rng.random::<f64>());
        let m = (&raw + raw.transpose()) * 0.5;
        let a = symmetric_spectrum(&m).unwrap();
        let b = symmetric_spectrum(&m).unwrap();
        assert_eq!(a.eigenvalues(), b.eigenvalues());
        assert_eq!(a.eigenvectors(), b.eigenvectors());
    }

    #[test]
    fn prior_eigenvalue_arithmetic() {
        let spectrum = eigendecompose(&path_laplacian()).unwrap();
        let model = prior_covariance(&spectrum, 1.0, 1.0).unwrap();
        assert_eq!(model.eigenvalues()[0], 1.0);
        assert_relative_eq!(model.eigenvalues()[1], 1.0 / 3.0, max_relative = 1e-15);
        let model2 = prior_covariance(&spectrum, 1.0, 2.0).unwrap();
        assert_relative_eq!(model2.eigenvalues()[1], 1.0 / 9.0, max_relative = 1e-15);
    }

    #[test]
    fn prior_eigenvalues_monotone_and_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let raw = DMatrix::from_fn(8, 8, |_, _| rng.random::<f64>() * 0.5);
        let sym = (&raw + raw.transpose()) * 0.5;
        let w = WeightMatrix::new(DMatrix::from_fn(8, 8, |i, j| {
            if i == j {
                0.0
            } else {
                sym[(i, j)] + 0.1
            }
        }))
        .unwrap();
        let l = graph::degree_and_laplacian(&w, 0.0).unwrap();
        let spectrum = eigendecompose(&l).unwrap();
        let model = prior_covariance(&spectrum, 0.3, 1.5).unwrap();
        let lam = model.eigenvalues();
        for j in 0..lam.len() {
            assert!(lam[j] <= 1.0 && lam[j] > 0.0);
            if j > 0 {
                assert!(lam[j] <= lam[j - 1] + 1e-15);
            }
        }
    }

    #[test]
    fn unit_multiplicity_matches_kernel_dimension() {
        // Two disjoint 2-cliques: kernel of L_0 has dimension 2.
        let w = WeightMatrix::new(DMatrix::from_fn(4, 4, |i, j| {
            if i == j || (i < 2) != (j < 2) {
                0.0
            } else {
                1.0
            }
        }))
        .unwrap();
        let l = graph::degree_and_laplacian(&w, 0.0).unwrap();
        let spectrum = eigendecompose(&l).unwrap();
        let model = prior_covariance(&spectrum, 0.1, 1.0).unwrap();
        let ones = model
            .eigenvalues()
            .iter()
            .filter(|&&l| l > 1.0 - 1e-9)
            .count();
        let kernel = spectrum
            .eigenvalues()
            .iter()
            .filter(|&&s| s.abs() < 1e-10)
            .count();
        assert_eq!(ones, 2);
        assert_eq!(kernel, 2);
    }

    #[test]
    fn precision_recovers_inverse() {
        let spectrum = eigendecompose(&path_laplacian()).unwrap();
        let model = prior_covariance(&spectrum, 0.05, 1.5).unwrap();
        let prec = model.precision_eigenvalues();
        for j in 0..model.size() {
            assert_relative_eq!(
                prec[j],
                1.0 / model.eigenvalues()[j],
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn set_function_values() {
        let degrees = DVector::from_vec(vec![1.0, 1.0, 1.0]);
        let clustering = Clustering::new(vec![1, 1, 2]).unwrap();
        let sf = set_functions(&degrees, &clustering, 0.0).unwrap();
        let s = 0.5_f64.sqrt();
        assert_relative_eq!(sf.as_matrix()[(0, 0)], s, max_relative = 1e-15);
        assert_relative_eq!(sf.as_matrix()[(1, 0)], s, max_relative = 1e-15);
        assert_eq!(sf.as_matrix()[(2, 0)], 0.0);

        let degrees = DVector::from_vec(vec![4.0, 1.0]);
        let clustering = Clustering::new(vec![1, 1]).unwrap();
        let sf = set_functions(&degrees, &clustering, 0.5).unwrap();
        let norm = 5.0_f64.sqrt();
        assert_relative_eq!(sf.as_matrix()[(0, 0)], 2.0 / norm, max_relative = 1e-15);
        assert_relative_eq!(sf.as_matrix()[(1, 0)], 1.0 / norm, max_relative = 1e-15);
        assert_relative_eq!(sf.column(0).norm(), 1.0, max_relative = 1e-15);
    }

    #[test]
    fn set_functions_span_kernel_of_block_laplacian() {
        let w = WeightMatrix::new(DMatrix::from_fn(5, 5, |i, j| {
            if i == j || (i < 3) != (j < 3) {
                0.0
            } else {
                0.5 + 0.1 * (i + j) as f64
            }
        }))
        .unwrap();
        let clustering = Clustering::contiguous(&[3, 2]).unwrap();
        for p in [0.0, 0.5] {
            let l = graph::degree_and_laplacian(&w, p).unwrap();
            let sf = set_functions(w.degrees(), &clustering, p).unwrap();
            for k in 0..2 {
                let chi = sf.column(k);
                assert!((l.as_matrix() * &chi).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn prior_samples_deterministic_and_sized() {
        let spectrum = eigendecompose(&path_laplacian()).unwrap();
        let model = prior_covariance(&spectrum, 0.7, 1.0).unwrap();
        let empty = sample_prior(&model, 0, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(empty.nrows(), 0);
        let a = sample_prior(&model, 3, &mut ChaCha8Rng::seed_from_u64(42));
        let b = sample_prior(&model, 3, &mut ChaCha8Rng::seed_from_u64(42));
        assert_eq!(a, b);
    }

    #[test]
    fn prior_sample_moments_match_eigenvalues() {
        let w = WeightMatrix::new(DMatrix::from_fn(4, 4, |i, j| {
            if i == j {
                0.0
            } else {
                0.4
            }
        }))
        .unwrap();
        let l = graph::degree_and_laplacian(&w, 0.0).unwrap();
        let spectrum = eigendecompose(&l).unwrap();
        let model = prior_covariance(&spectrum, 0.6, 1.0).unwrap();
        let samples = 100_000;
        let u = sample_prior(&model, samples, &mut ChaCha8Rng::seed_from_u64(9));
        let phi = model.spectrum().eigenvectors();
        for j in 0..4 {
            let phi_j = phi.column(j).into_owned();
            let mut acc = 0.0;
            for m in 0..samples {
                let c = u.row(m).transpose().dot(&phi_j);
                acc += c * c;
            }
            let est = acc / samples as f64;
            let lam = model.eigenvalues()[j];
            let stderr = lam * (2.0 / samples as f64).sqrt();
            assert!(
                (est - lam).abs() <= 3.0 * stderr,
                "eigenvalue {j}: estimate {est} vs {lam}"
            );
        }
        // Rows are independent: cross-covariance vanishes within noise.
        let phi_0 = phi.column(0).into_owned();
        let mut cross = 0.0;
        for m in 0..(samples / 2) {
            let a = u.row(2 * m).transpose().dot(&phi_0);
            let b = u.row(2 * m + 1).transpose().dot(&phi_0);
            cross += a * b;
        }
        let pairs = (samples / 2) as f64;
        let est = cross / pairs;
        let stderr = model.eigenvalues()[0] / pairs.sqrt();
        assert!(est.abs() <= 3.0 * stderr, "cross-covariance {est}");
    }

    fn three_block_family(n_per: usize, seed: u64) -> (PerturbationFamily, Clustering) {
        let n = 3 * n_per;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut base = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                if i / n_per == j / n_per {
                    let v = 0.2 + 0.8 * rng.random::<f64>();
                    base[(i, j)] = v;
                    base[(j, i)] = v;
                }
            }
        }
        let mut c1 = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                let v = rng.random::<f64>();
                c1[(i, j)] = v;
                c1[(j, i)] = v;
            }
        }
        let family = PerturbationFamily::new(WeightMatrix::new(base).unwrap(), vec![c1]).unwrap();
        let clustering = Clustering::contiguous(&[n_per, n_per, n_per]).unwrap();
        (family, clustering)
    }

    #[test]
    fn diagnostics_at_zero_perturbation() {
        let (family, clustering) = three_block_family(6, 5);
        let l0 = graph::degree_and_laplacian(family.base(), 0.0).unwrap();
        let spec0 = eigendecompose(&l0).unwrap();
        let sf = set_functions(family.base().degrees(), &clustering, 0.0).unwrap();
        let report = perturbation_diagnostics(&spec0, &spec0, &sf, None).unwrap();
        for r in &report.residuals {
            assert!(*r <= 1e-12, "residual {r}");
        }
        assert!(report.subspace_distance <= 1e-6);
        assert!(report.gap_lower_bound.is_none());
    }

    #[test]
    fn residuals_scale_quadratically_in_eps() {
        let (family, clustering) = three_block_family(8, 11);
        let l0 = graph::degree_and_laplacian(family.base(), 0.0).unwrap();
        let spec0 = eigendecompose(&l0).unwrap();
        let sf = set_functions(family.base().degrees(), &clustering, 0.0).unwrap();
        let norms = graph::laplacian_expansion_norms(&family).unwrap();
        let eps_grid = [1e-3, 2e-3, 4e-3, 8e-3];
        let mut totals = Vec::new();
        for &eps in &eps_grid {
            let w = graph::assemble_perturbed(&family, eps).unwrap();
            let l = graph::degree_and_laplacian(&w, 0.0).unwrap();
            let spec = eigendecompose(&l).unwrap();
            let report = perturbation_diagnostics(
                &spec0,
                &spec,
                &sf,
                Some(GapBound {
                    term_norms: &norms,
                    eps,
                }),
            )
            .unwrap();
            let bound = report.gap_lower_bound.unwrap();
            assert!(
                report.sigma_k_plus_1 >= bound,
                "gap bound violated: {} < {bound}",
                report.sigma_k_plus_1
            );
            totals.push(report.residuals.iter().sum::<f64>());
        }
        // Successive eps double, so the squared residual should grow ~4x.
        for i in 1..totals.len() {
            let slope = (totals[i] / totals[i - 1]).ln() / 2.0_f64.ln();
            assert!(
                (slope - 2.0).abs() <= 0.3,
                "log-log slope {slope} out of band"
            );
        }
    }
}
