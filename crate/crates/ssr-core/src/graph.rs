//! Similarity graphs, graph Laplacians, and weakly connected perturbations.
//!
//! A weight matrix encodes pairwise affinities between feature vectors. From
//! it we form the graph Laplacian `L = D^{-p} (D - W) D^{-p}` (`p = 0`
//! unnormalized, `p = 1/2` normalized). Weakly connected graphs are modeled
//! as a block-diagonal base matrix plus polynomial corrections in a
//! perturbation parameter `eps`:
//!
//! ```text
//! W_eps = W_0 + sum_{h=1..h_max} eps^h W^(h)
//! ```
//!
//! Conventions used throughout:
//! - constructed weight matrices have a zero diagonal; degrees come from
//!   off-diagonal mass only (diagonal entries cancel in `D - W` anyway),
//! - symmetry is bit-exact, enforced at construction,
//! - entries in `[-CLAMP_TOL, 0)` produced by round-off are clamped to zero.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::spectral;

/// Round-off clamp for weight entries after perturbation assembly.
pub const CLAMP_TOL: f64 = 1e-12;

/// Relative tolerance on the block spectral gap in [`check_assumptions`].
pub const GAP_TOL: f64 = 1e-8;

/// A set of feature vectors, all of the same dimension.
#[derive(Debug, Clone)]
pub struct PointCloud {
    points: Vec<DVector<f64>>,
    dim: usize,
}

impl PointCloud {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::TooFewPoints(points.len()));
        }
        let dim = points[0].len();
        if dim == 0 {
            return Err(Error::PointDimension {
                index: 0,
                expected: 1,
                found: 0,
            });
        }
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::PointDimension {
                    index: i,
                    expected: dim,
                    found: p.len(),
                });
            }
        }
        let points = points.into_iter().map(DVector::from_vec).collect();
        Ok(Self { points, dim })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &DVector<f64> {
        &self.points[i]
    }

    /// Squared Euclidean distance between points `i` and `j`.
    pub fn dist_sq(&self, i: usize, j: usize) -> f64 {
        let mut acc = 0.0;
        for d in 0..self.dim {
            let delta = self.points[i][d] - self.points[j][d];
            acc += delta * delta;
        }
        acc
    }
}

/// Affinity kernel evaluated on Euclidean distances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kernel {
    /// `exp(-t^2 / r^2)` with bandwidth `r`.
    Gaussian { bandwidth: f64 },
    /// Indicator of the interval `[0, r]`.
    Indicator { bandwidth: f64 },
}

impl Kernel {
    fn bandwidth(self) -> f64 {
        match self {
            Kernel::Gaussian { bandwidth } | Kernel::Indicator { bandwidth } => bandwidth,
        }
    }

    /// Evaluate the kernel on a squared distance.
    fn eval_sq(self, dist_sq: f64) -> f64 {
        match self {
            Kernel::Gaussian { bandwidth } => (-dist_sq / (bandwidth * bandwidth)).exp(),
            Kernel::Indicator { bandwidth } => {
                if dist_sq <= bandwidth * bandwidth {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Symmetric nonnegative affinity matrix with strictly positive row sums.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    w: DMatrix<f64>,
    degrees: DVector<f64>,
}

impl WeightMatrix {
    /// Validates symmetry (bit-exact), nonnegativity, and positive row sums.
    pub fn new(w: DMatrix<f64>) -> Result<Self> {
        let (rows, cols) = w.shape();
        if rows != cols {
            return Err(Error::NotSquare { rows, cols });
        }
        for i in 0..rows {
            for j in 0..cols {
                let v = w[(i, j)];
                if !v.is_finite() {
                    return Err(Error::NonFiniteEntry { i, j });
                }
                if v < 0.0 {
                    return Err(Error::NegativeWeight { i, j, value: v });
                }
                if j > i && v != w[(j, i)] {
                    return Err(Error::NotSymmetric {
                        i,
                        j,
                        a: v,
                        b: w[(j, i)],
                    });
                }
            }
        }
        let degrees = DVector::from_iterator(rows, w.row_iter().map(|r| r.sum()));
        for (i, d) in degrees.iter().enumerate() {
            if *d <= 0.0 {
                return Err(Error::IsolatedVertex {
                    vertex: i,
                    row_sum: *d,
                });
            }
        }
        Ok(Self { w, degrees })
    }

    pub fn size(&self) -> usize {
        self.w.nrows()
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.w[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.w
    }

    /// Row sums `d_i = sum_j w_ij`.
    pub fn degrees(&self) -> &DVector<f64> {
        &self.degrees
    }
}

/// Assignment of vertices to clusters with ids `1..=K`, every cluster
/// nonempty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clustering {
    ids: Vec<usize>,
    sizes: Vec<usize>,
    members: Vec<Vec<usize>>,
}

impl Clustering {
    /// `ids[v]` is the 1-based cluster id of vertex `v`.
    pub fn new(ids: Vec<usize>) -> Result<Self> {
        if ids.is_empty() {
            return Err(Error::ClusterIds {
                detail: "empty assignment".into(),
            });
        }
        let k = *ids.iter().max().expect("nonempty");
        if k == 0 {
            return Err(Error::ClusterIds {
                detail: "ids are 1-based; found 0".into(),
            });
        }
        let mut members = vec![Vec::new(); k];
        for (v, &id) in ids.iter().enumerate() {
            if id == 0 || id > k {
                return Err(Error::ClusterIds {
                    detail: format!("vertex {v} has id {id}, expected 1..={k}"),
                });
            }
            members[id - 1].push(v);
        }
        if let Some(empty) = members.iter().position(|m| m.is_empty()) {
            return Err(Error::ClusterIds {
                detail: format!("cluster {} is empty", empty + 1),
            });
        }
        let sizes = members.iter().map(|m| m.len()).collect();
        Ok(Self { ids, sizes, members })
    }

    /// Clustering with `sizes[k]` consecutive vertices per cluster.
    pub fn contiguous(sizes: &[usize]) -> Result<Self> {
        let mut ids = Vec::with_capacity(sizes.iter().sum());
        for (k, &s) in sizes.iter().enumerate() {
            ids.extend(std::iter::repeat(k + 1).take(s));
        }
        Self::new(ids)
    }

    pub fn vertex_count(&self) -> usize {
        self.ids.len()
    }

    pub fn cluster_count(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// 1-based cluster id of vertex `v`.
    pub fn id_of(&self, v: usize) -> usize {
        self.ids[v]
    }

    /// Vertices of the cluster with 0-based index `k`.
    pub fn members(&self, k: usize) -> &[usize] {
        &self.members[k]
    }

    pub fn same_cluster(&self, i: usize, j: usize) -> bool {
        self.ids[i] == self.ids[j]
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }
}

/// Block-diagonal base matrix plus symmetric zero-diagonal corrections
/// `W^(1)..W^(h_max)`.
#[derive(Debug, Clone)]
pub struct PerturbationFamily {
    base: WeightMatrix,
    corrections: Vec<DMatrix<f64>>,
}

impl PerturbationFamily {
    pub fn new(base: WeightMatrix, corrections: Vec<DMatrix<f64>>) -> Result<Self> {
        let n = base.size();
        for (idx, c) in corrections.iter().enumerate() {
            let h = idx + 1;
            if c.nrows() != n || c.ncols() != n {
                return Err(Error::CorrectionShape {
                    h,
                    rows: c.nrows(),
                    cols: c.ncols(),
                    n,
                });
            }
            for i in 0..n {
                if c[(i, i)] != 0.0 {
                    return Err(Error::CorrectionDiagonal { h, vertex: i });
                }
                for j in (i + 1)..n {
                    let v = c[(i, j)];
                    if !v.is_finite() {
                        return Err(Error::NonFiniteEntry { i, j });
                    }
                    if v != c[(j, i)] {
                        return Err(Error::NotSymmetric {
                            i,
                            j,
                            a: v,
                            b: c[(j, i)],
                        });
                    }
                }
            }
        }
        Ok(Self { base, corrections })
    }

    pub fn base(&self) -> &WeightMatrix {
        &self.base
    }

    pub fn corrections(&self) -> &[DMatrix<f64>] {
        &self.corrections
    }

    /// Truncation order `h_max`.
    pub fn order(&self) -> usize {
        self.corrections.len()
    }

    pub fn size(&self) -> usize {
        self.base.size()
    }
}

/// Graph Laplacian `D^{-p} (D - W) D^{-p}` with its normalization exponent
/// and degree vector.
#[derive(Debug, Clone)]
pub struct Laplacian {
    matrix: DMatrix<f64>,
    p: f64,
    degrees: DVector<f64>,
}

impl Laplacian {
    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn degrees(&self) -> &DVector<f64> {
        &self.degrees
    }
}

/// Connectivity certificate for a block-diagonal weight matrix.
#[derive(Debug, Clone)]
pub struct AssumptionReport {
    /// Second-smallest eigenvalue of each block Laplacian.
    pub block_gaps: Vec<f64>,
    /// Uniform spectral gap `theta = min_k block_gaps[k]`.
    pub theta: f64,
    pub clusters: usize,
}

/// Kernel-based weight matrix `w_ij = kappa(|x_i - x_j|)` with zero diagonal.
pub fn build_weights(cloud: &PointCloud, kernel: Kernel) -> Result<WeightMatrix> {
    if kernel.bandwidth() <= 0.0 {
        return Err(Error::NonPositiveBandwidth(kernel.bandwidth()));
    }
    let n = cloud.len();
    let mut w = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = kernel.eval_sq(cloud.dist_sq(i, j));
            w[(i, j)] = v;
            w[(j, i)] = v;
        }
    }
    WeightMatrix::new(w)
}

/// Self-tuning weights `w_ij = exp(-|x_i - x_j|^2 / (r_i r_j))` where `r_i`
/// is the distance from `x_i` to its `k`-th nearest neighbor.
pub fn zelnik_perona_weights(cloud: &PointCloud, k: usize) -> Result<WeightMatrix> {
    let n = cloud.len();
    if k == 0 || k > n - 1 {
        return Err(Error::NeighborCount { k, max: n - 1 });
    }
    let mut dist_sq = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = cloud.dist_sq(i, j);
            dist_sq[(i, j)] = d;
            dist_sq[(j, i)] = d;
        }
    }
    let mut scales = Vec::with_capacity(n);
    for i in 0..n {
        let mut row: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| dist_sq[(i, j)]).collect();
        row.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
        let r = row[k - 1].sqrt();
        if r == 0.0 {
            return Err(Error::DuplicatePoint { vertex: i });
        }
        scales.push(r);
    }
    let mut w = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = (-dist_sq[(i, j)] / (scales[i] * scales[j])).exp();
            w[(i, j)] = v;
            w[(j, i)] = v;
        }
    }
    WeightMatrix::new(w)
}

/// Builds `L = D^{-p} (D - W) D^{-p}` from the degree vector of `w`.
pub fn degree_and_laplacian(w: &WeightMatrix, p: f64) -> Result<Laplacian> {
    let n = w.size();
    let degrees = w.degrees().clone();
    for (i, d) in degrees.iter().enumerate() {
        if *d <= 0.0 {
            return Err(Error::NonPositiveDegree {
                vertex: i,
                degree: *d,
            });
        }
    }
    // d^0 == 1 exactly, so p = 0 reproduces D - W bit for bit.
    let dp: Vec<f64> = degrees.iter().map(|d| d.powf(-p)).collect();
    let mut l = DMatrix::zeros(n, n);
    for i in 0..n {
        l[(i, i)] = dp[i] * (degrees[i] - w.entry(i, i)) * dp[i];
        for j in (i + 1)..n {
            let v = -(dp[i] * w.entry(i, j) * dp[j]);
            l[(i, j)] = v;
            l[(j, i)] = v;
        }
    }
    Ok(Laplacian {
        matrix: l,
        p,
        degrees,
    })
}

/// Assembles `W_eps = W_0 + sum_h eps^h W^(h)`, symmetrized as
/// `(W + W^T) / 2`, clamping round-off negatives in `[-CLAMP_TOL, 0)`.
pub fn assemble_perturbed(family: &PerturbationFamily, eps: f64) -> Result<WeightMatrix> {
    if !(eps >= 0.0) {
        return Err(Error::EpsilonOutOfRange {
            value: eps,
            bound: "eps >= 0",
        });
    }
    let n = family.size();
    let mut acc = family.base().as_matrix().clone();
    for (idx, c) in family.corrections().iter().enumerate() {
        let scale = eps.powi(idx as i32 + 1);
        acc += c * scale;
    }
    let sym = (&acc + acc.transpose()) * 0.5;
    let mut w = sym;
    for i in 0..n {
        for j in 0..n {
            let v = w[(i, j)];
            if v < 0.0 {
                if v >= -CLAMP_TOL {
                    w[(i, j)] = 0.0;
                } else {
                    return Err(Error::EpsilonTooLarge { i, j, value: v });
                }
            }
        }
    }
    WeightMatrix::new(w)
}

/// Multiplies entries between distinct clusters by `eps`; intra-cluster
/// entries are copied untouched.
pub fn scale_intercluster(
    w: &WeightMatrix,
    clustering: &Clustering,
    eps: f64,
) -> Result<WeightMatrix> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::EpsilonOutOfRange {
            value: eps,
            bound: "0 <= eps <= 1",
        });
    }
    let n = w.size();
    if clustering.vertex_count() != n {
        return Err(Error::ClusteringSize {
            expected: n,
            found: clustering.vertex_count(),
        });
    }
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let v = w.entry(i, j);
            out[(i, j)] = if clustering.same_cluster(i, j) {
                v
            } else {
                v * eps
            };
        }
    }
    WeightMatrix::new(out)
}

/// Verifies that `w0` is block diagonal under `clustering` and that every
/// block Laplacian (normalization `p`) has a positive spectral gap. Returns
/// the per-block gaps and their minimum `theta`.
pub fn check_assumptions(
    w0: &WeightMatrix,
    clustering: &Clustering,
    p: f64,
) -> Result<AssumptionReport> {
    let n = w0.size();
    if clustering.vertex_count() != n {
        return Err(Error::ClusteringSize {
            expected: n,
            found: clustering.vertex_count(),
        });
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if !clustering.same_cluster(i, j) && w0.entry(i, j) != 0.0 {
                return Err(Error::NotBlockDiagonal { i, j });
            }
        }
    }
    let k = clustering.cluster_count();
    let mut block_gaps = Vec::with_capacity(k);
    for c in 0..k {
        let members = clustering.members(c);
        let m = members.len();
        if m < 2 {
            return Err(Error::BlockNotConnected {
                cluster: c + 1,
                gap: 0.0,
            });
        }
        let block =
            DMatrix::from_fn(m, m, |a, b| w0.entry(members[a], members[b]));
        let block_w = WeightMatrix::new(block)?;
        let block_l = degree_and_laplacian(&block_w, p)?;
        let spectrum = spectral::eigendecompose(&block_l)?;
        let gap = spectrum.eigenvalue(1);
        let scale = block_l
            .as_matrix()
            .iter()
            .fold(0.0_f64, |acc, v| acc.max(v.abs()));
        if gap <= GAP_TOL * scale.max(1.0) {
            return Err(Error::BlockNotConnected {
                cluster: c + 1,
                gap,
            });
        }
        block_gaps.push(gap);
    }
    let theta = block_gaps.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(AssumptionReport {
        block_gaps,
        theta,
        clusters: k,
    })
}

/// Spectral norms of the unnormalized Laplacian expansion terms
/// `L^(h) = D^(h) - W^(h)` induced by the family corrections (valid for
/// `p = 0`, where the expansion is exact and finite).
pub fn laplacian_expansion_norms(family: &PerturbationFamily) -> Result<Vec<f64>> {
    family
        .corrections()
        .iter()
        .map(|c| {
            let n = c.nrows();
            let mut l = -c.clone();
            for i in 0..n {
                l[(i, i)] += c.row(i).sum();
            }
            spectral::spectral_norm(&l)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn two_point_cloud(dist: f64) -> PointCloud {
        PointCloud::new(vec![vec![0.0], vec![dist]]).unwrap()
    }

    #[test]
    fn gaussian_kernel_same_point_gives_one() {
        let cloud = PointCloud::new(vec![vec![1.0, 2.0], vec![1.0, 2.0], vec![9.0, 9.0]]).unwrap();
        let w = build_weights(
            &cloud,
            Kernel::Gaussian { bandwidth: 0.5 },
        )
        .unwrap();
        assert_eq!(w.entry(0, 1), 1.0);
    }

    #[test]
    fn indicator_kernel_outside_interval_is_zero() {
        // |x_0 - x_2| = 2r falls outside [0, r].
        let cloud = PointCloud::new(vec![vec![0.0], vec![0.9], vec![2.0], vec![2.5]]).unwrap();
        let w = build_weights(&cloud, Kernel::Indicator { bandwidth: 1.0 }).unwrap();
        assert_eq!(w.entry(0, 2), 0.0);
        assert_eq!(w.entry(0, 1), 1.0);
        assert_eq!(w.entry(2, 3), 1.0);
    }

    #[test]
    fn gaussian_kernel_at_bandwidth() {
        let cloud = two_point_cloud(0.7);
        let w = build_weights(&cloud, Kernel::Gaussian { bandwidth: 0.7 }).unwrap();
        assert_relative_eq!(w.entry(0, 1), (-1.0_f64).exp(), max_relative = 1e-15);
    }

    #[test]
    fn isolated_vertex_rejected_with_vertex_name() {
        let cloud = PointCloud::new(vec![vec![0.0], vec![0.5], vec![100.0]]).unwrap();
        let err = build_weights(&cloud, Kernel::Indicator { bandwidth: 1.0 }).unwrap_err();
        match err {
            Error::IsolatedVertex { vertex, .. } => assert_eq!(vertex, 2),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn zelnik_perona_two_points() {
        let cloud = two_point_cloud(3.0);
        let w = zelnik_perona_weights(&cloud, 1).unwrap();
        assert_relative_eq!(w.entry(0, 1), (-1.0_f64).exp(), max_relative = 1e-15);
        assert_eq!(w.entry(0, 0), 0.0);
        assert_eq!(w.entry(1, 1), 0.0);
    }

    #[test]
    fn zelnik_perona_collinear_triple() {
        // Points 0, 1, 3 with k = 1: scales r = (1, 1, 2).
        let cloud = PointCloud::new(vec![vec![0.0], vec![1.0], vec![3.0]]).unwrap();
        let w = zelnik_perona_weights(&cloud, 1).unwrap();
        assert_relative_eq!(w.entry(0, 1), (-1.0_f64).exp(), max_relative = 1e-14);
        assert_relative_eq!(w.entry(0, 2), (-4.5_f64).exp(), max_relative = 1e-14);
        assert_relative_eq!(w.entry(1, 2), (-2.0_f64).exp(), max_relative = 1e-14);
    }

    #[test]
    fn zelnik_perona_duplicates_rejected() {
        let cloud = PointCloud::new(vec![vec![1.0], vec![1.0], vec![2.0]]).unwrap();
        let err = zelnik_perona_weights(&cloud, 1).unwrap_err();
        assert!(matches!(err, Error::DuplicatePoint { .. }));
    }

    #[test]
    fn two_vertex_laplacian() {
        let w = WeightMatrix::new(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])).unwrap();
        let l0 = degree_and_laplacian(&w, 0.0).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
        assert_eq!(l0.as_matrix(), &expected);
        // Unit degrees: the normalized Laplacian coincides.
        let lh = degree_and_laplacian(&w, 0.5).unwrap();
        assert_eq!(lh.as_matrix(), &expected);
    }

    #[test]
    fn unnormalized_laplacian_annihilates_ones() {
        let w = WeightMatrix::new(DMatrix::from_row_slice(
            3,
            3,
            &[0.0, 0.3, 1.2, 0.3, 0.0, 0.7, 1.2, 0.7, 0.0],
        ))
        .unwrap();
        let l = degree_and_laplacian(&w, 0.0).unwrap();
        let ones = DVector::from_element(3, 1.0);
        let r = l.as_matrix() * ones;
        assert!(r.amax() < 1e-12);
    }

    fn small_family() -> PerturbationFamily {
        let base = WeightMatrix::new(DMatrix::from_row_slice(
            4,
            4,
            &[
                0.0, 1.0, 0.0, 0.0, //
                1.0, 0.0, 0.0, 0.0, //
                0.0, 0.0, 0.0, 1.0, //
                0.0, 0.0, 1.0, 0.0,
            ],
        ))
        .unwrap();
        let mut c1 = DMatrix::from_element(4, 4, 1.0);
        c1.fill_diagonal(0.0);
        PerturbationFamily::new(base, vec![c1]).unwrap()
    }

    #[test]
    fn assemble_at_zero_is_base_bit_exact() {
        let family = small_family();
        let w = assemble_perturbed(&family, 0.0).unwrap();
        assert_eq!(w.as_matrix(), family.base().as_matrix());
    }

    #[test]
    fn assemble_adds_scaled_correction() {
        let family = small_family();
        let w = assemble_perturbed(&family, 0.1).unwrap();
        assert_relative_eq!(w.entry(0, 2), 0.1, max_relative = 1e-15);
        assert_relative_eq!(w.entry(0, 1), 1.1, max_relative = 1e-15);
    }

    #[test]
    fn assemble_rejects_negative_entries() {
        let base = WeightMatrix::new(DMatrix::from_row_slice(
            2,
            2,
            &[0.0, 0.05, 0.05, 0.0],
        ))
        .unwrap();
        let c = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, -1.0, 0.0]);
        let family = PerturbationFamily::new(base, vec![c]).unwrap();
        let err = assemble_perturbed(&family, 0.1).unwrap_err();
        match err {
            Error::EpsilonTooLarge { value, .. } => {
                assert_relative_eq!(value, -0.05, max_relative = 1e-12)
            }
            other => panic!("unexpected error {other}"),
        }
    }

    fn two_blocks() -> (WeightMatrix, Clustering) {
        let w = WeightMatrix::new(DMatrix::from_row_slice(
            4,
            4,
            &[
                0.0, 0.8, 0.0, 0.0, //
                0.8, 0.0, 0.0, 0.0, //
                0.0, 0.0, 0.0, 0.5, //
                0.0, 0.0, 0.5, 0.0,
            ],
        ))
        .unwrap();
        let clustering = Clustering::contiguous(&[2, 2]).unwrap();
        (w, clustering)
    }

    #[test]
    fn scale_intercluster_limits() {
        let (w, clustering) = two_blocks();
        let full = WeightMatrix::new(DMatrix::from_fn(4, 4, |i, j| {
            if i == j {
                0.0
            } else if (i < 2) == (j < 2) {
                0.8
            } else {
                0.6
            }
        }))
        .unwrap();
        let unchanged = scale_intercluster(&full, &clustering, 1.0).unwrap();
        assert_eq!(unchanged.as_matrix(), full.as_matrix());
        let cut = scale_intercluster(&full, &clustering, 0.0).unwrap();
        assert_eq!(cut.entry(0, 2), 0.0);
        assert_eq!(cut.entry(0, 1), 0.8);
        let tiny = scale_intercluster(&full, &clustering, 1e-3).unwrap();
        assert_relative_eq!(tiny.entry(1, 3), 6e-4, max_relative = 1e-15);
        let _ = w;
    }

    #[test]
    fn check_assumptions_two_cliques() {
        let w = WeightMatrix::new(DMatrix::from_fn(4, 4, |i, j| {
            if i == j {
                0.0
            } else if (i < 2) == (j < 2) {
                1.0
            } else {
                0.0
            }
        }))
        .unwrap();
        let clustering = Clustering::contiguous(&[2, 2]).unwrap();
        let report = check_assumptions(&w, &clustering, 0.0).unwrap();
        assert_eq!(report.clusters, 2);
        // Each block is [[1,-1],[-1,1]] with eigenvalues (0, 2).
        assert_relative_eq!(report.theta, 2.0, max_relative = 1e-12);
    }

    #[test]
    fn check_assumptions_detects_off_block_mass() {
        let (w, _) = two_blocks();
        let mut m = w.as_matrix().clone();
        m[(0, 2)] = 0.1;
        m[(2, 0)] = 0.1;
        let w = WeightMatrix::new(m).unwrap();
        let clustering = Clustering::contiguous(&[2, 2]).unwrap();
        let err = check_assumptions(&w, &clustering, 0.0).unwrap_err();
        assert!(matches!(err, Error::NotBlockDiagonal { i: 0, j: 2 }));
    }

    #[test]
    fn check_assumptions_detects_disconnected_block() {
        // One declared cluster containing two separate edges.
        let w = WeightMatrix::new(DMatrix::from_row_slice(
            4,
            4,
            &[
                0.0, 1.0, 0.0, 0.0, //
                1.0, 0.0, 0.0, 0.0, //
                0.0, 0.0, 0.0, 1.0, //
                0.0, 0.0, 1.0, 0.0,
            ],
        ))
        .unwrap();
        let clustering = Clustering::contiguous(&[4]).unwrap();
        let err = check_assumptions(&w, &clustering, 0.0).unwrap_err();
        assert!(matches!(err, Error::BlockNotConnected { cluster: 1, .. }));
    }

    #[test]
    fn check_assumptions_single_connected_cluster() {
        let w = WeightMatrix::new(DMatrix::from_fn(3, 3, |i, j| {
            if i == j {
                0.0
            } else {
                1.0
            }
        }))
        .unwrap();
        let clustering = Clustering::contiguous(&[3]).unwrap();
        let report = check_assumptions(&w, &clustering, 0.0).unwrap();
        assert_eq!(report.clusters, 1);
        assert!(report.theta > 0.0);
    }

    #[test]
    fn expansion_norms_match_direct_eigen() {
        let family = small_family();
        let norms = laplacian_expansion_norms(&family).unwrap();
        let c = &family.corrections()[0];
        let n = c.nrows();
        let mut l = -c.clone();
        for i in 0..n {
            l[(i, i)] += c.row(i).sum();
        }
        let direct = spectral::spectral_norm(&l).unwrap();
        assert_relative_eq!(norms[0], direct, max_relative = 1e-12);
    }

    #[test]
    fn clustering_validation() {
        assert!(Clustering::new(vec![1, 3]).is_err()); // id 2 missing
        assert!(Clustering::new(vec![0, 1]).is_err()); // 0 is not a valid id
        let c = Clustering::new(vec![1, 2, 1]).unwrap();
        assert_eq!(c.sizes(), &[2, 1]);
        assert_eq!(c.members(0), &[0, 2]);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn arbitrary_weights(n: usize) -> impl Strategy<Value = WeightMatrix> {
            proptest::collection::vec(0.05f64..1.0, n * (n - 1) / 2).prop_map(move |upper| {
                let mut w = DMatrix::zeros(n, n);
                let mut it = upper.into_iter();
                for i in 0..n {
                    for j in (i + 1)..n {
                        let v = it.next().unwrap();
                        w[(i, j)] = v;
                        w[(j, i)] = v;
                    }
                }
                WeightMatrix::new(w).unwrap()
            })
        }

        proptest! {
            #[test]
            fn laplacian_quadratic_form_nonnegative(
                w in arbitrary_weights(6),
                x in proptest::collection::vec(-1.0f64..1.0, 6),
                p in 0.0f64..=0.5,
            ) {
                let l = degree_and_laplacian(&w, p).unwrap();
                let x = DVector::from_vec(x);
                let q = x.dot(&(l.as_matrix() * &x));
                let scale = l.as_matrix().amax();
                prop_assert!(q >= -1e-8 * scale.max(1.0));
            }

            #[test]
            fn intercluster_scaling_composes(
                w in arbitrary_weights(6),
                e1 in 0.0f64..=1.0,
                e2 in 0.0f64..=1.0,
            ) {
                let clustering = Clustering::contiguous(&[3, 3]).unwrap();
                let a = scale_intercluster(
                    &scale_intercluster(&w, &clustering, e1).unwrap(),
                    &clustering,
                    e2,
                ).unwrap();
                let b = scale_intercluster(&w, &clustering, e1 * e2).unwrap();
                for i in 0..6 {
                    for j in 0..6 {
                        prop_assert!((a.entry(i, j) - b.entry(i, j)).abs() <= 1e-15);
                    }
                }
            }

            #[test]
            fn assembled_weights_symmetric_nonnegative(
                w in arbitrary_weights(6),
                eps in 0.0f64..=0.5,
            ) {
                let mut c = DMatrix::from_element(6, 6, 0.25);
                c.fill_diagonal(0.0);
                let family = PerturbationFamily::new(w, vec![c]).unwrap();
                let out = assemble_perturbed(&family, eps).unwrap();
                for i in 0..6 {
                    for j in 0..6 {
                        prop_assert!(out.entry(i, j) >= 0.0);
                        prop_assert_eq!(out.entry(i, j), out.entry(j, i));
                    }
                }
            }
        }
    }
}
