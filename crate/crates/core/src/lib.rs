//! Point-cloud re-metrization via localized Gaussian approximations.
//!
//! The core object is a weighted point cloud together with a metric on its
//! points. Each iteration replaces the metric by a Wasserstein-type distance
//! between per-point localized Gaussians (mean + covariance of the
//! epsilon-neighborhood), which contracts clusters and sharpens geometric
//! structure. Exact discrete optimal transport and plain mean-shift are
//! provided as baselines, together with analysis utilities (clustering,
//! MDS, k-NN, rank correlation), an image segmentation pipeline, and a
//! word-embedding similarity booster.

pub mod analysis;
pub mod datasets;
pub mod embed;
pub mod error;
pub mod gt;
pub mod image;
pub mod measure;
pub mod ot;
pub mod psd;

pub mod svg;

pub use error::{Error, Result};
