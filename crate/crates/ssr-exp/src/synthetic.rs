//! Synthetic weakly connected graphs: a block-diagonal base matrix with
//! uniform random intra-cluster weights plus uniform random correction
//! matrices, all symmetrized and fixed once sampled.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ssr_core::graph::{Clustering, PerturbationFamily, WeightMatrix};

use crate::error::Result;

/// Parameters for the synthetic family.
#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    pub clusters: usize,
    pub cluster_size: usize,
    /// Truncation order of the perturbation expansion.
    pub h_max: usize,
    pub seed: u64,
    /// Restrict correction entries to inter-cluster positions.
    pub offblock_only: bool,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            clusters: 3,
            cluster_size: 100,
            h_max: 3,
            seed: 0,
            offblock_only: false,
        }
    }
}

/// Samples every off-diagonal entry i.i.d. Uniform[0,1] where `keep` allows,
/// then symmetrizes via `(M + M^T) / 2`.
fn sampled_symmetric<R: Rng>(
    n: usize,
    rng: &mut R,
    keep: impl Fn(usize, usize) -> bool,
) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j && keep(i, j) {
                m[(i, j)] = rng.random::<f64>();
            }
        }
    }
    (&m + m.transpose()) * 0.5
}

/// Draws the family `(W_0, W^(1)..W^(h_max))` and its clustering. The base
/// matrix is block diagonal; corrections cover all off-diagonal positions
/// unless `offblock_only` is set. Matrices are fixed once sampled and reused
/// across every perturbation size in a sweep.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<(PerturbationFamily, Clustering)> {
    let n = spec.clusters * spec.cluster_size;
    let sizes = vec![spec.cluster_size; spec.clusters];
    let clustering = Clustering::contiguous(&sizes)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let base = sampled_symmetric(n, &mut rng, |i, j| clustering.same_cluster(i, j));
    let base = WeightMatrix::new(base)?;

    let mut corrections = Vec::with_capacity(spec.h_max);
    for _ in 0..spec.h_max {
        let c = if spec.offblock_only {
            sampled_symmetric(n, &mut rng, |i, j| !clustering.same_cluster(i, j))
        } else {
            sampled_symmetric(n, &mut rng, |_, _| true)
        };
        corrections.push(c);
    }
    let family = PerturbationFamily::new(base, corrections)?;
    Ok((family, clustering))
}
