//! Pinhole cameras, rigid transforms and cross-view depth warping.
//!
//! Pixel centres sit at integer coordinates with `(0, 0)` the centre of the
//! top-left pixel; `u` grows to the right and `v` grows downwards. Camera
//! frames are x-right, y-down, z-forward.

mod camera;
mod depth;
mod transform;

pub use camera::{project, unproject, Intrinsics};
pub use depth::{sample_inverse_depth, warp_depth, warp_image, DepthField};
pub use transform::RigidTransform;
pub(crate) use transform::orthonormality_error;

pub use nalgebra::{Matrix3, Vector2, Vector3};
