//! Synthetic ground truth standing in for learned depth networks.
//!
//! Scenes are made of textured planar surfaces rendered analytically, so
//! depth maps are exact and images are photo-consistent across views.
//! Measurement and prior noise follow explicit models with explicit seeds.
//!
//! Randomness: every pixel draws from its own `ChaCha8Rng` seeded with a
//! SplitMix64 hash of `(seed, stream, pixel index)`, so results do not depend
//! on evaluation order or thread count and reproduce across platforms.

mod measurement;
mod quadrature;
mod rng;
mod scene;
mod texture;

pub use measurement::{make_prior, make_probvolume, sample_observation, MeasurementModel, PriorModel};
pub use quadrature::{quadrature_posterior, QuadratureGrid, QuadraturePosterior};
pub use rng::pixel_rng;
pub use scene::{forward_trajectory, make_scene, Layout, RenderedView, SceneSpec};
