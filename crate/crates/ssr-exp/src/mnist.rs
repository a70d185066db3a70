//! IDX ingestion and the MNIST-style experiment: self-tuning similarity
//! graph over sampled digit images, known clustering from the digit classes,
//! one label per digit, set-function ground truth.

use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng;

use ssr_core::graph::{self, Clustering, PointCloud, WeightMatrix};
use ssr_core::inference::{GroundTruth, LabelSet};
use ssr_core::spectral::set_functions;

use crate::error::{Error, Result};

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;

/// Raw contents of an IDX image file.
#[derive(Debug, Clone)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

impl IdxImages {
    /// One image per row, pixel bytes divided by 255.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        let dim = self.rows * self.cols;
        DMatrix::from_fn(self.count, dim, |i, j| {
            f64::from(self.pixels[i * dim + j]) / 255.0
        })
    }
}

fn read_u32_be(bytes: &[u8], offset: usize, path: &Path) -> Result<u32> {
    let end = offset + 4;
    if bytes.len() < end {
        return Err(Error::IdxTruncated {
            path: path.display().to_string(),
            expected: end,
            found: bytes.len(),
        });
    }
    Ok(u32::from_be_bytes([
        bytes[offset],
        bytes[offset + 1],
        bytes[offset + 2],
        bytes[offset + 3],
    ]))
}

/// Parses an uncompressed big-endian IDX image file (magic `0x00000803`).
pub fn read_idx_images(path: &Path) -> Result<IdxImages> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let magic = read_u32_be(&bytes, 0, path)?;
    if magic != IMAGE_MAGIC {
        return Err(Error::IdxMagic {
            path: path.display().to_string(),
            found: magic,
            expected: IMAGE_MAGIC,
        });
    }
    let count = read_u32_be(&bytes, 4, path)? as usize;
    let rows = read_u32_be(&bytes, 8, path)? as usize;
    let cols = read_u32_be(&bytes, 12, path)? as usize;
    let expected = 16 + count * rows * cols;
    if bytes.len() < expected {
        return Err(Error::IdxTruncated {
            path: path.display().to_string(),
            expected,
            found: bytes.len(),
        });
    }
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels: bytes[16..expected].to_vec(),
    })
}

/// Parses an uncompressed big-endian IDX label file (magic `0x00000801`).
pub fn read_idx_labels(path: &Path) -> Result<Vec<u8>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let magic = read_u32_be(&bytes, 0, path)?;
    if magic != LABEL_MAGIC {
        return Err(Error::IdxMagic {
            path: path.display().to_string(),
            found: magic,
            expected: LABEL_MAGIC,
        });
    }
    let count = read_u32_be(&bytes, 4, path)? as usize;
    let expected = 8 + count;
    if bytes.len() < expected {
        return Err(Error::IdxTruncated {
            path: path.display().to_string(),
            expected,
            found: bytes.len(),
        });
    }
    Ok(bytes[8..expected].to_vec())
}

/// Writes images in IDX format; used for fixtures and round-trip tests.
pub fn write_idx_images(path: &Path, images: &[Vec<u8>], rows: usize, cols: usize) -> Result<()> {
    let mut bytes = Vec::with_capacity(16 + images.len() * rows * cols);
    bytes.extend_from_slice(&IMAGE_MAGIC.to_be_bytes());
    bytes.extend_from_slice(&(images.len() as u32).to_be_bytes());
    bytes.extend_from_slice(&(rows as u32).to_be_bytes());
    bytes.extend_from_slice(&(cols as u32).to_be_bytes());
    for img in images {
        assert_eq!(img.len(), rows * cols, "image payload size");
        bytes.extend_from_slice(img);
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Writes labels in IDX format.
pub fn write_idx_labels(path: &Path, labels: &[u8]) -> Result<()> {
    let mut bytes = Vec::with_capacity(8 + labels.len());
    bytes.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    bytes.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    bytes.extend_from_slice(labels);
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Images restricted to the selected digits, in cluster-contiguous order.
#[derive(Debug, Clone)]
pub struct MnistSubset {
    /// One image per row, values in [0, 1].
    pub data: DMatrix<f64>,
    /// Digit of each row.
    pub digits: Vec<u8>,
    /// Selected digit classes, ascending.
    pub selected: Vec<u8>,
    /// Images per digit.
    pub per_digit: usize,
}

/// Uniformly samples `per_digit` images of each selected digit (without
/// replacement) and stacks them digit by digit.
pub fn select_subset<R: Rng + ?Sized>(
    images: &DMatrix<f64>,
    labels: &[u8],
    digits: &[u8],
    per_digit: usize,
    rng: &mut R,
) -> Result<MnistSubset> {
    if images.nrows() != labels.len() {
        return Err(Error::IdxCountMismatch {
            images: images.nrows(),
            labels: labels.len(),
        });
    }
    let mut selected: Vec<u8> = digits.to_vec();
    selected.sort_unstable();
    selected.dedup();
    let dim = images.ncols();
    let mut data_rows = Vec::new();
    let mut row_digits = Vec::new();
    for &digit in &selected {
        let pool: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == digit).collect();
        if pool.len() < per_digit {
            return Err(Error::InsufficientImages {
                digit,
                requested: per_digit,
                available: pool.len(),
            });
        }
        let mut chosen: Vec<usize> = rand::seq::index::sample(rng, pool.len(), per_digit).into_vec();
        chosen.sort_unstable();
        for idx in chosen {
            data_rows.push(images.row(pool[idx]).into_owned());
            row_digits.push(digit);
        }
    }
    let mut data = DMatrix::zeros(data_rows.len(), dim);
    for (i, row) in data_rows.iter().enumerate() {
        data.row_mut(i).copy_from(row);
    }
    Ok(MnistSubset {
        data,
        digits: row_digits,
        selected,
        per_digit,
    })
}

/// Everything the sweep needs for the scaled-intercluster experiment.
#[derive(Debug, Clone)]
pub struct MnistExperiment {
    pub weights: WeightMatrix,
    pub clustering: Clustering,
    pub labels: LabelSet,
    pub truth: GroundTruth,
}

/// Builds the self-tuning similarity graph over the subset, the digit
/// clustering, one labeled vertex per digit (lowest index), and the
/// set-function ground truth for normalization exponent `p`.
pub fn build_mnist_experiment(subset: &MnistSubset, k_nn: usize, p: f64) -> Result<MnistExperiment> {
    let n = subset.data.nrows();
    let points: Vec<Vec<f64>> = (0..n)
        .map(|i| subset.data.row(i).iter().cloned().collect())
        .collect();
    let cloud = PointCloud::new(points)?;
    let weights = graph::zelnik_perona_weights(&cloud, k_nn)?;

    let ids: Vec<usize> = subset
        .digits
        .iter()
        .map(|d| subset.selected.iter().position(|s| s == d).expect("selected digit") + 1)
        .collect();
    let clustering = Clustering::new(ids)?;

    let label_indices: Vec<usize> = (0..clustering.cluster_count())
        .map(|k| clustering.members(k)[0])
        .collect();
    let labels = LabelSet::new(label_indices, n)?;
    labels.check_cluster_coverage(&clustering)?;

    // Ground truth uses the degrees of the fully decoupled graph.
    let w0 = graph::scale_intercluster(&weights, &clustering, 0.0)?;
    let setfns = set_functions(w0.degrees(), &clustering, p)?;
    let truth = GroundTruth::from_set_functions(&setfns);
    Ok(MnistExperiment {
        weights,
        clustering,
        labels,
        truth,
    })
}

/// Deterministic digit-like test images: three visually distinct stroke
/// patterns with per-image jitter. Returns (images, labels) with ten images
/// per digit of {1, 4, 7}, interleaved.
pub fn fixture_images() -> (Vec<Vec<u8>>, Vec<u8>) {
    let mut images = Vec::new();
    let mut labels = Vec::new();
    let set = |img: &mut Vec<u8>, r: i32, c: i32, v: u8| {
        if (0..28).contains(&r) && (0..28).contains(&c) {
            img[(r * 28 + c) as usize] = v;
        }
    };
    for i in 0..10 {
        let jitter = (i % 5) as i32 - 2;
        let ink = 200 + 5 * (i as u8);

        let mut one = vec![0u8; 784];
        for r in 4..24 {
            set(&mut one, r, 13 + jitter, ink);
            set(&mut one, r, 14 + jitter, ink);
        }
        images.push(one);
        labels.push(1);

        let mut four = vec![0u8; 784];
        for r in 4..15 {
            set(&mut four, r, 8 + jitter, ink);
        }
        for c in 8..20 {
            set(&mut four, 14, c + jitter, ink);
        }
        for r in 4..24 {
            set(&mut four, r, 17 + jitter, ink);
        }
        images.push(four);
        labels.push(4);

        let mut seven = vec![0u8; 784];
        for c in 6..22 {
            set(&mut seven, 5, c + jitter, ink);
        }
        for r in 6..24 {
            let c = 21 - (r - 6) * 11 / 18;
            set(&mut seven, r, c + jitter, ink);
        }
        images.push(seven);
        labels.push(7);
    }
    (images, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join("ssr_exp_mnist_tests");
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(format!("{}_{}", std::process::id(), name))
    }

    #[test]
    fn idx_round_trip_and_normalization() {
        let images = vec![vec![0u8, 128, 255, 64], vec![255u8, 0, 0, 1]];
        let path = tmp("imgs");
        write_idx_images(&path, &images, 2, 2).unwrap();
        let back = read_idx_images(&path).unwrap();
        assert_eq!((back.count, back.rows, back.cols), (2, 2, 2));
        let m = back.to_matrix();
        assert_eq!(m[(0, 2)], 1.0);
        assert_eq!(m[(1, 0)], 1.0);
        assert_eq!(m[(0, 0)], 0.0);
    }

    #[test]
    fn idx_rejects_bad_magic() {
        let path = tmp("bad_magic");
        write_idx_labels(&path, &[1, 2, 3]).unwrap();
        let err = read_idx_images(&path).unwrap_err();
        assert!(matches!(err, Error::IdxMagic { found, .. } if found == 0x0000_0801));
    }

    #[test]
    fn idx_rejects_truncation() {
        let path = tmp("trunc");
        let images = vec![vec![7u8; 9]; 3];
        write_idx_images(&path, &images, 3, 3).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 4]).unwrap();
        assert!(matches!(
            read_idx_images(&path).unwrap_err(),
            Error::IdxTruncated { .. }
        ));
    }

    #[test]
    fn subset_counts_mismatch_rejected() {
        let images = DMatrix::zeros(3, 4);
        let labels = vec![1u8, 4];
        let err = select_subset(&images, &labels, &[1], 1, &mut ChaCha8Rng::seed_from_u64(0))
            .unwrap_err();
        assert!(matches!(err, Error::IdxCountMismatch { images: 3, labels: 2 }));
    }

    #[test]
    fn subset_insufficient_images_rejected() {
        let images = DMatrix::zeros(3, 4);
        let labels = vec![1u8, 1, 4];
        let err = select_subset(&images, &labels, &[1, 4], 2, &mut ChaCha8Rng::seed_from_u64(0))
            .unwrap_err();
        assert!(matches!(
            err,
            Error::InsufficientImages {
                digit: 4,
                requested: 2,
                available: 1
            }
        ));
    }

    #[test]
    fn fixture_pipeline_invariants() {
        let (images, labels) = fixture_images();
        let path = tmp("fixture_imgs");
        let lpath = tmp("fixture_labels");
        write_idx_images(&path, &images, 28, 28).unwrap();
        write_idx_labels(&lpath, &labels).unwrap();
        let raw = read_idx_images(&path).unwrap();
        let labels = read_idx_labels(&lpath).unwrap();
        let matrix = raw.to_matrix();
        let subset =
            select_subset(&matrix, &labels, &[1, 4, 7], 10, &mut ChaCha8Rng::seed_from_u64(5))
                .unwrap();
        assert_eq!(subset.data.nrows(), 30);
        assert!(subset.data.iter().all(|v| (0.0..=1.0).contains(v)));

        let exp = build_mnist_experiment(&subset, 15, 0.0).unwrap();
        assert_eq!(exp.clustering.sizes().iter().sum::<usize>(), 30);
        assert_eq!(exp.truth.class_count(), 3);
        for m in 0..3 {
            let norm = exp.truth.as_matrix().row(m).norm();
            assert!((norm - 1.0).abs() < 1e-12, "row {m} norm {norm}");
        }
        exp.labels.check_cluster_coverage(&exp.clustering).unwrap();
        let w0 = graph::scale_intercluster(&exp.weights, &exp.clustering, 0.0).unwrap();
        let report = graph::check_assumptions(&w0, &exp.clustering, 0.0).unwrap();
        assert!(report.theta > 0.0);
    }

    #[test]
    fn subset_selection_deterministic() {
        let (images, labels) = fixture_images();
        let path = tmp("det_imgs");
        write_idx_images(&path, &images, 28, 28).unwrap();
        let matrix = read_idx_images(&path).unwrap().to_matrix();
        let a = select_subset(&matrix, &labels, &[1, 7], 4, &mut ChaCha8Rng::seed_from_u64(9))
            .unwrap();
        let b = select_subset(&matrix, &labels, &[1, 7], 4, &mut ChaCha8Rng::seed_from_u64(9))
            .unwrap();
        assert_eq!(a.data, b.data);
        assert_eq!(a.digits, b.digits);
    }
}
