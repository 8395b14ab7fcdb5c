//! Refinement of dense monocular depth priors with sparse multi-view depth
//! observations.
//!
//! The crate is organised around the data flow of the fusion pipeline:
//!
//! - [`geometry`]: pinhole projection, SE(3) poses and depth warping.
//! - [`probvolume`]: depth and entropy regression from per-pixel plane
//!   distributions.
//! - [`consistency`]: forward-backward geometric check between a target depth
//!   map and its source views, producing sparse inverse-depth observations.
//! - [`bayesfilter`]: per-pixel Gaussian x Beta inverse-depth filter.
//! - [`photometrics`]: losses, depth metrics and sparsification curves.
//! - [`synth`]: synthetic scenes and measurement models used as ground truth.
//! - [`io`]: file formats (PFM, KITTI poses, intrinsics, CSV, manifests).

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bayesfilter;
pub mod consistency;
mod error;
pub mod geometry;
mod grid;
pub mod io;
pub mod photometrics;
pub mod probvolume;
pub mod synth;

pub use error::{Error, Result};
pub use grid::Grid;
