//! Experiment harness for the graph SSR contraction study: synthetic and
//! MNIST-style dataset generation, the `(eps, gamma, alpha)` parameter
//! sweep, slope-surface analysis, and CSV/SVG output.

pub mod analysis;
pub mod csvio;
pub mod error;
pub mod mnist;
pub mod seed;
pub mod svg;
pub mod sweep;
pub mod synthetic;

pub use error::{Error, Result};
