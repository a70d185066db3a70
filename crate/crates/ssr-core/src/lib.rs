//! Graph-based Bayesian semi-supervised regression.
//!
//! Builds similarity graphs and graph Laplacians, places a graph Matern
//! prior `C_tau = tau^{2a} (L + tau^2 I)^{-a}` on functions over the
//! vertices, conditions on noisy labels through a Gaussian likelihood, and
//! evaluates how fast the resulting posterior contracts around a clustered
//! ground truth as the label noise and the inter-cluster coupling shrink.
//!
//! Modules:
//! - [`graph`]: weight matrices, Laplacians, weakly connected perturbations
//! - [`spectral`]: eigendecompositions, the prior in eigenbasis form,
//!   sampling, perturbation diagnostics
//! - [`inference`]: label model, likelihood potential, closed-form posterior
//! - [`contraction`]: the contraction functional, its decomposition, and
//!   log-log slope surfaces
//! - [`io`]: CSV import/export

pub mod contraction;
pub mod error;
pub mod graph;
pub mod inference;
pub mod io;
pub mod spectral;

pub use error::{Error, Result};
