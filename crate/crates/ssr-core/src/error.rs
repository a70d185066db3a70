use thiserror::Error;

/// Errors surfaced by graph construction, spectral decompositions, and the
/// posterior/contraction pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("point cloud needs at least two points, got {0}")]
    TooFewPoints(usize),

    #[error("point {index} has dimension {found}, expected {expected}")]
    PointDimension {
        index: usize,
        expected: usize,
        found: usize,
    },

    #[error("kernel bandwidth must be positive, got {0}")]
    NonPositiveBandwidth(f64),

    #[error("neighbor count k={k} must satisfy 1 <= k <= {max}")]
    NeighborCount { k: usize, max: usize },

    #[error("vertex {vertex} has a zero self-tuning scale: duplicate feature vectors")]
    DuplicatePoint { vertex: usize },

    #[error("vertex {vertex} is isolated: row sum {row_sum} is not strictly positive")]
    IsolatedVertex { vertex: usize, row_sum: f64 },

    #[error("matrix is {rows}x{cols}, expected square")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix entry ({i}, {j}) breaks symmetry: {a} != {b}")]
    NotSymmetric { i: usize, j: usize, a: f64, b: f64 },

    #[error("negative weight {value} at ({i}, {j})")]
    NegativeWeight { i: usize, j: usize, value: f64 },

    #[error("entry ({i}, {j}) is not finite")]
    NonFiniteEntry { i: usize, j: usize },

    #[error("correction matrix {h} has nonzero diagonal at vertex {vertex}")]
    CorrectionDiagonal { h: usize, vertex: usize },

    #[error("correction matrix {h} is {rows}x{cols}, expected {n}x{n}")]
    CorrectionShape {
        h: usize,
        rows: usize,
        cols: usize,
        n: usize,
    },

    #[error("epsilon must satisfy {bound}, got {value}")]
    EpsilonOutOfRange { value: f64, bound: &'static str },

    #[error(
        "epsilon too large for nonnegative weights: entry ({i}, {j}) assembles to {value}"
    )]
    EpsilonTooLarge { i: usize, j: usize, value: f64 },

    #[error("cluster ids must be contiguous from 1: {detail}")]
    ClusterIds { detail: String },

    #[error("clustering covers {found} vertices, expected {expected}")]
    ClusteringSize { expected: usize, found: usize },

    #[error("weight matrix is not block diagonal: inter-cluster entry at ({i}, {j})")]
    NotBlockDiagonal { i: usize, j: usize },

    #[error("subgraph not connected: cluster {cluster} has spectral gap {gap:e}")]
    BlockNotConnected { cluster: usize, gap: f64 },

    #[error("eigensolver failed: {detail}")]
    EigenFailure { detail: String },

    #[error("matrix is not positive semi-definite: smallest eigenvalue {min_eigenvalue:e}")]
    NotPositiveSemiDefinite { min_eigenvalue: f64 },

    #[error("tau must be positive, got {0}")]
    NonPositiveTau(f64),

    #[error("alpha must be positive, got {0}")]
    NonPositiveAlpha(f64),

    #[error(
        "prior eigenvalue out of representable range for sigma={sigma:e}, tau={tau:e}, alpha={alpha}"
    )]
    PriorEigenvalueRange { sigma: f64, tau: f64, alpha: f64 },

    #[error("vertex {vertex} has non-positive degree {degree}")]
    NonPositiveDegree { vertex: usize, degree: f64 },

    #[error("label index {index} out of range for {n} vertices")]
    LabelOutOfRange { index: usize, n: usize },

    #[error("duplicate label index {index}")]
    DuplicateLabel { index: usize },

    #[error("label set is empty")]
    NoLabels,

    #[error("cluster {cluster} has no observed label")]
    ClusterWithoutLabel { cluster: usize },

    #[error("gamma must be positive, got {0}")]
    NonPositiveGamma(f64),

    #[error("gamma must be nonnegative, got {0}")]
    NegativeGamma(f64),

    #[error("inner {j}x{j} system is singular")]
    SingularInnerSystem { j: usize },

    #[error("posterior covariance numerically indefinite: smallest eigenvalue {min_eigenvalue:e}")]
    CovarianceIndefinite { min_eigenvalue: f64 },

    #[error("ground truth row {row} leaves the set-function span: residual {residual:e}")]
    TruthOutsideSpan { row: usize, residual: f64 },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("subspace dimension k={k} out of range for n={n}")]
    SubspaceDimension { k: usize, n: usize },

    #[error("monte carlo sample count must be at least 2, got {0}")]
    TooFewSamples(usize),

    #[error("delta must be positive, got {0}")]
    NonPositiveDelta(f64),

    #[error("grid axis {axis} needs at least 3 points for differentiation, got {len}")]
    GridTooSmall { axis: &'static str, len: usize },

    #[error("grid axis {axis} is not strictly monotone at position {position}")]
    GridNotMonotone { axis: &'static str, position: usize },

    #[error("grid is not rectangular: {detail}")]
    NonRectangularGrid { detail: String },

    #[error("cannot take log of non-positive value {value} at grid cell ({row}, {col})")]
    NonPositiveGridValue { row: usize, col: usize, value: f64 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error at line {line}: {detail}")]
    Parse { line: usize, detail: String },
}

pub type Result<T> = std::result::Result<T, Error>;
