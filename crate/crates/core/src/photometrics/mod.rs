//! Photometric and smoothness losses, depth error metrics and
//! sparsification-based evaluation of uncertainty maps.
//!
//! Everything here is a pure evaluation function; nothing is differentiated.

mod image;
mod loss;
mod metrics;
mod sparsify;

pub use image::Image;
pub use loss::{
    min_reprojection, mono_loss, nll_loss, photometric_residual, refined_total_loss,
    smoothness_loss, DEFAULT_ALPHA, DEFAULT_SMOOTHNESS_WEIGHT,
};
pub use metrics::{depth_metrics, per_pixel_errors, DepthMetrics, ErrorKind, MetricOptions, DEFAULT_DEPTH_CAP};
pub use sparsify::{sparsification, SparsificationResult, SparsifyMetric, DEFAULT_SPARSIFICATION_STEP};
