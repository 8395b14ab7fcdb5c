use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::rng::splitmix64;
use super::texture::shade;
use crate::error::{Error, Result};
use crate::geometry::{DepthField, Intrinsics, RigidTransform};
use crate::photometrics::Image;
use crate::Grid;

/// Arrangement of planar surfaces in front of the first camera.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Layout {
    /// Background wall plus rectangles facing the camera.
    FrontoParallel,
    /// One tilted plane.
    Slanted,
    /// Floor, treads and risers climbing away from the camera.
    Staircase,
    /// Street-like: ground, side facades, boxes and a back wall.
    Mixed,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub layout: Layout,
    /// `[near, far]` in meters, measured from the first camera.
    pub depth_range: [f64; 2],
    /// Procedural texture id (0 noise + stripes, 1 noise, 2 stripes, 3 flat).
    #[serde(default)]
    pub texture: u32,
    #[serde(default)]
    pub seed: u64,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let [near, far] = self.depth_range;
        if !(near > 0.0 && far > near && far.is_finite()) {
            return Err(Error::InvalidArgument(format!("depth range [{near}, {far}]")));
        }
        Ok(())
    }
}

/// Ground-truth render of one camera.
#[derive(Clone, Debug, PartialEq)]
pub struct RenderedView {
    pub depth: DepthField,
    pub image: Image,
}

#[derive(Clone, Debug)]
struct Surface {
    origin: Vector3<f64>,
    /// Points to the side the cameras must stay on.
    normal: Vector3<f64>,
    axis_u: Vector3<f64>,
    axis_v: Vector3<f64>,
    half_extent: Option<(f64, f64)>,
    seed: u64,
}

impl Surface {
    fn new(origin: Vector3<f64>, normal: Vector3<f64>, axis_u: Vector3<f64>, half_extent: Option<(f64, f64)>) -> Self {
        let normal = normal.normalize();
        let axis_u = (axis_u - normal * normal.dot(&axis_u)).normalize();
        let axis_v = normal.cross(&axis_u);
        Self {
            origin,
            normal,
            axis_u,
            axis_v,
            half_extent,
            seed: 0,
        }
    }

    fn local(&self, p: &Vector3<f64>) -> (f64, f64) {
        let d = p - self.origin;
        (d.dot(&self.axis_u), d.dot(&self.axis_v))
    }

    fn contains(&self, p: &Vector3<f64>) -> bool {
        match self.half_extent {
            None => true,
            Some((hu, hv)) => {
                let (u, v) = self.local(p);
                u.abs() <= hu && v.abs() <= hv
            }
        }
    }

    /// Ray parameter of the hit, for `origin + t dir`.
    fn intersect(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<f64> {
        let denom = self.normal.dot(dir);
        if denom.abs() < 1e-12 {
            return None;
        }
        let t = self.normal.dot(&(self.origin - origin)) / denom;
        (t > 1e-9 && self.contains(&(origin + dir * t))).then_some(t)
    }
}

const X: Vector3<f64> = Vector3::new(1.0, 0.0, 0.0);
const Y: Vector3<f64> = Vector3::new(0.0, 1.0, 0.0);
const Z: Vector3<f64> = Vector3::new(0.0, 0.0, 1.0);

fn back_wall(far: f64) -> Surface {
    Surface::new(Vector3::new(0.0, 0.0, far), -Z, X, None)
}

fn build_surfaces(spec: &SceneSpec) -> Vec<Surface> {
    let [near, far] = spec.depth_range;
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(spec.seed ^ 0x5CE7E));
    let span = far - near;
    let mut surfaces = match spec.layout {
        Layout::FrontoParallel => {
            let mut s = vec![back_wall(far)];
            for frac in [0.6, 0.35, 0.15] {
                let d = near + span * (frac + rng.random_range(-0.05..0.05));
                let cx = rng.random_range(-0.4..0.4) * d;
                let cy = rng.random_range(-0.08..0.08) * d;
                let hu = rng.random_range(0.15..0.3) * d;
                let hv = rng.random_range(0.1..0.2) * d;
                s.push(Surface::new(Vector3::new(cx, cy, d), -Z, X, Some((hu, hv))));
            }
            s
        }
        Layout::Slanted => {
            let mid = (near * far).sqrt();
            let yaw: f64 = rng.random_range(0.35..0.5) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let pitch: f64 = rng.random_range(-0.15..0.15);
            let normal = Vector3::new(yaw.sin(), pitch.sin(), -yaw.cos() * pitch.cos());
            vec![Surface::new(Vector3::new(0.0, 0.0, mid), normal, X, None)]
        }
        Layout::Staircase => {
            let height = 1.5;
            let steps = 6;
            let rise = 0.3;
            let start = near + 0.1 * span;
            let run = 0.5 * span / steps as f64;
            let width = far;
            let mut s = vec![
                back_wall(far),
                // floor up to the first riser
                Surface::new(
                    Vector3::new(0.0, height, 0.5 * start),
                    -Y,
                    X,
                    Some((width, 0.5 * start)),
                ),
            ];
            for i in 1..=steps {
                let z0 = start + (i - 1) as f64 * run;
                let y_top = height - i as f64 * rise;
                s.push(Surface::new(Vector3::new(0.0, y_top + 0.5 * rise, z0), -Z, X, Some((width, 0.5 * rise))));
                let z_end = if i == steps { far } else { z0 + run };
                s.push(Surface::new(
                    Vector3::new(0.0, y_top, 0.5 * (z0 + z_end)),
                    -Y,
                    X,
                    Some((width, 0.5 * (z_end - z0))),
                ));
            }
            s
        }
        Layout::Mixed => {
            let ground = 1.6;
            let mut s = vec![
                back_wall(far),
                Surface::new(Vector3::new(0.0, ground, 0.0), -Y, X, None),
                Surface::new(Vector3::new(-6.0, 0.0, 0.0), X, Z, None),
                Surface::new(Vector3::new(7.0, 0.0, 0.0), -X, Z, None),
            ];
            for frac in [0.08, 0.2, 0.45] {
                let d = near + span * (frac + rng.random_range(-0.02..0.02));
                let cx = rng.random_range(-3.5..3.5);
                let hu = rng.random_range(0.6..1.5);
                let hv = rng.random_range(0.5..1.0);
                s.push(Surface::new(Vector3::new(cx, ground - hv, d), -Z, X, Some((hu, hv))));
            }
            // A slanted board leaning out of the left facade.
            let d = near + span * 0.3;
            let normal = Vector3::new(0.6, 0.0, -0.8);
            s.push(Surface::new(Vector3::new(-4.5, 0.2, d), normal, Y.cross(&normal), Some((1.5, 1.2))));
            s
        }
    };
    for (i, surface) in surfaces.iter_mut().enumerate() {
        surface.seed = splitmix64(spec.seed ^ ((i as u64 + 1) << 32) ^ spec.texture as u64);
    }
    surfaces
}

/// Camera-to-world poses moving forward along +z by `step` meters per frame
/// with a small deterministic sway.
pub fn forward_trajectory(frames: usize, step: f64, seed: u64) -> Vec<RigidTransform> {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ 0x7A11));
    (0..frames)
        .map(|i| {
            let yaw = rng.random_range(-0.01..0.01);
            let lateral = rng.random_range(-0.05..0.05);
            let vertical = rng.random_range(-0.02..0.02);
            RigidTransform::from_axis_angle(Y, yaw, Vector3::new(lateral, vertical, i as f64 * step))
        })
        .collect()
}

/// Renders exact depth and texture for each camera-to-world pose.
pub fn make_scene(spec: &SceneSpec, k: &Intrinsics, trajectory: &[RigidTransform]) -> Result<Vec<RenderedView>> {
    spec.validate()?;
    k.validate()?;
    if trajectory.is_empty() {
        return Err(Error::InvalidArgument("empty trajectory".into()));
    }
    let surfaces = build_surfaces(spec);
    for (view, pose) in trajectory.iter().enumerate() {
        let c = pose.translation();
        for s in &surfaces {
            let side = s.normal.dot(&(c - s.origin));
            let inside = match s.half_extent {
                None => side <= 1e-3,
                Some(_) => side.abs() <= 1e-3 && s.contains(c),
            };
            if inside {
                return Err(Error::Degenerate(format!(
                    "camera {view} at {:?} is inside the scene geometry",
                    c.as_slice()
                )));
            }
        }
    }
    trajectory.iter().map(|pose| Ok(render(&surfaces, spec.texture, k, pose))).collect()
}

fn render(surfaces: &[Surface], texture: u32, k: &Intrinsics, pose: &RigidTransform) -> RenderedView {
    let (w, h) = (k.width, k.height);
    let center = *pose.translation();
    let hits: Vec<Option<(f64, usize, Vector3<f64>)>> = (0..w * h)
        .into_par_iter()
        .map(|i| {
            let (x, y) = (i % w, i / w);
            let ray = Vector3::new((x as f64 - k.cx) / k.fx, (y as f64 - k.cy) / k.fy, 1.0);
            let dir = pose.rotation() * ray;
            surfaces
                .iter()
                .enumerate()
                .filter_map(|(si, s)| s.intersect(&center, &dir).map(|t| (t, si)))
                .min_by(|a, b| a.0.total_cmp(&b.0))
                .map(|(t, si)| (t, si, center + dir * t))
        })
        .collect();
    let depth = DepthField::from_values(
        Grid::from_vec(w, h, hits.iter().map(|hit| hit.map_or(f64::NAN, |(t, _, _)| t)).collect())
            .expect("one hit per pixel"),
    );
    let mut data = Vec::with_capacity(w * h * 3);
    for hit in &hits {
        for c in 0..3 {
            data.push(match hit {
                Some((_, si, p)) => {
                    let s = &surfaces[*si];
                    let (u, v) = s.local(p);
                    shade(texture, s.seed, u, v, c)
                }
                None => 0.0,
            });
        }
    }
    let image = Image::new(w, h, 3, data).expect("shaded values lie in [0, 1]");
    RenderedView { depth, image }
}
