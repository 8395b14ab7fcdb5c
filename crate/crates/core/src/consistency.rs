//! Geometric consistency between a target depth map and source-view depth
//! maps, and conversion of the surviving pixels into inverse-depth
//! observations for the filter.
//!
//! For each target pixel `p` with depth `d`, the point is projected into the
//! source view, the source depth is sampled there, and the sampled point is
//! projected back into the target. `e_dist` is the pixel distance between `p`
//! and the round-tripped pixel; `e_diff` compares `d` with the depth that the
//! source view assigns to the same location in the target frame.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    project, sample_inverse_depth, unproject, warp_depth, DepthField, Intrinsics, RigidTransform,
};
use crate::Grid;

/// Floor on the matching error used for the observation variance.
const MIN_MATCH_ERROR_PX: f64 = 0.5;

/// How the depth difference `e_diff` is measured.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DepthDiffKind {
    /// `|d_src - d| / d`
    #[default]
    Relative,
    /// `|d_src - d|` in meters.
    Absolute,
    /// `|1/d_src - 1/d|` in 1/m.
    InverseDepth,
}

/// Which source-derived depth `e_diff` compares against.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceDepth {
    /// Target-frame depth of the round-tripped point (sub-pixel, bilinear).
    #[default]
    Reprojected,
    /// Source map forward-warped into the target with nearest-pixel
    /// rasterisation and z-buffering.
    Rasterized,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConsistencyThresholds {
    /// Round-trip pixel distance threshold.
    pub e1: f64,
    /// Depth difference threshold, in the units of `interpretation`.
    pub e2: f64,
    pub interpretation: DepthDiffKind,
    pub source_depth: SourceDepth,
}

impl Default for ConsistencyThresholds {
    fn default() -> Self {
        Self {
            e1: 1.0,
            e2: 0.001,
            interpretation: DepthDiffKind::Relative,
            source_depth: SourceDepth::Reprojected,
        }
    }
}

impl ConsistencyThresholds {
    pub fn validate(&self) -> Result<()> {
        if !(self.e1 > 0.0 && self.e1.is_finite() && self.e2 > 0.0 && self.e2.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "consistency thresholds must be positive, got e1={} e2={}",
                self.e1, self.e2
            )));
        }
        Ok(())
    }

    fn depth_diff(&self, reference: f64, target: f64) -> f64 {
        match self.interpretation {
            DepthDiffKind::Relative => (reference - target).abs() / target,
            DepthDiffKind::Absolute => (reference - target).abs(),
            DepthDiffKind::InverseDepth => (1.0 / reference - 1.0 / target).abs(),
        }
    }
}

/// Outcome of checking one target/source pair.
#[derive(Clone, Debug, PartialEq)]
pub struct ConsistencyReport {
    pub e_dist: Grid<f64>,
    pub e_diff: Grid<f64>,
    /// Pixels passing both tests; always a subset of `coverage`.
    pub mask: Grid<bool>,
    /// Pixels where both errors could be evaluated.
    pub coverage: Grid<bool>,
    /// Translation length of the pair's relative pose (m).
    pub baseline: f64,
    /// Mean focal length (px).
    pub focal: f64,
    pub thresholds: ConsistencyThresholds,
}

impl ConsistencyReport {
    /// Re-applies thresholds to the stored errors.
    pub fn rethreshold(&self, th: &ConsistencyThresholds) -> Grid<bool> {
        Grid::from_fn(self.mask.width(), self.mask.height(), |x, y| {
            *self.coverage.get(x, y) && *self.e_dist.get(x, y) < th.e1 && *self.e_diff.get(x, y) < th.e2
        })
    }

    pub fn covered_count(&self) -> usize {
        self.coverage.iter().filter(|c| **c).count()
    }

    pub fn passed_count(&self) -> usize {
        self.mask.iter().filter(|c| **c).count()
    }
}

/// Sparse inverse-depth measurement with per-pixel variance.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    inv_depth: Grid<f64>,
    variance: Grid<f64>,
    mask: Grid<bool>,
}

impl Observation {
    /// Fails unless masked inverse depths and variances are finite and positive.
    pub fn new(inv_depth: Grid<f64>, variance: Grid<f64>, mask: Grid<bool>) -> Result<Self> {
        variance.ensure_dims(inv_depth.dims())?;
        mask.ensure_dims(inv_depth.dims())?;
        for i in 0..mask.len() {
            if mask[i] {
                let (z, v) = (inv_depth[i], variance[i]);
                if !(z.is_finite() && z > 0.0 && v.is_finite() && v > 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "observation at {i}: inverse depth {z}, variance {v}"
                    )));
                }
            }
        }
        Ok(Self {
            inv_depth,
            variance,
            mask,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        self.inv_depth.dims()
    }

    pub fn inv_depth(&self) -> &Grid<f64> {
        &self.inv_depth
    }

    pub fn variance(&self) -> &Grid<f64> {
        &self.variance
    }

    pub fn mask(&self) -> &Grid<bool> {
        &self.mask
    }

    /// `(z, tau^2)` at a masked pixel.
    #[inline]
    pub fn at_index(&self, i: usize) -> Option<(f64, f64)> {
        self.mask[i].then(|| (self.inv_depth[i], self.variance[i]))
    }

    pub fn masked_count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }
}

/// Checks `target_depth` against one source view.
pub fn check_pair(
    target_depth: &DepthField,
    source_depth: &DepthField,
    pose_t_to_s: &RigidTransform,
    k: &Intrinsics,
    th: &ConsistencyThresholds,
) -> Result<ConsistencyReport> {
    th.validate()?;
    let dims = target_depth.dims();
    source_depth.values().ensure_dims(dims)?;
    let pose_s_to_t = pose_t_to_s.inverse();
    let rasterized = match th.source_depth {
        SourceDepth::Rasterized => Some(warp_depth(source_depth, &pose_s_to_t, k)),
        SourceDepth::Reprojected => None,
    };

    let (w, h) = dims;
    let mut e_dist = Grid::filled(w, h, f64::NAN);
    let mut e_diff = Grid::filled(w, h, f64::NAN);
    let mut coverage = Grid::filled(w, h, false);
    let mut mask = Grid::filled(w, h, false);
    for y in 0..h {
        for x in 0..w {
            let Some(d) = target_depth.at(x, y) else {
                continue;
            };
            let p = Vector2::new(x as f64, y as f64);
            let Some((round_trip, reprojected_depth)) =
                round_trip(&p, d, source_depth, pose_t_to_s, &pose_s_to_t, k)
            else {
                continue;
            };
            let reference = match &rasterized {
                Some(warped) => match warped.at(x, y) {
                    Some(v) => v,
                    None => continue,
                },
                None => reprojected_depth,
            };
            let dist = (round_trip - p).norm();
            let diff = th.depth_diff(reference, d);
            *e_dist.get_mut(x, y) = dist;
            *e_diff.get_mut(x, y) = diff;
            *coverage.get_mut(x, y) = true;
            *mask.get_mut(x, y) = dist < th.e1 && diff < th.e2;
        }
    }
    Ok(ConsistencyReport {
        e_dist,
        e_diff,
        mask,
        coverage,
        baseline: pose_t_to_s.baseline(),
        focal: k.mean_focal(),
        thresholds: *th,
    })
}

/// Target pixel -> source -> target; returns the round-tripped pixel and its
/// target-frame depth.
fn round_trip(
    p: &Vector2<f64>,
    depth: f64,
    source_depth: &DepthField,
    pose_t_to_s: &RigidTransform,
    pose_s_to_t: &RigidTransform,
    k: &Intrinsics,
) -> Option<(Vector2<f64>, f64)> {
    let in_target = unproject(p, depth, k).ok()?;
    let (q, _) = project(&pose_t_to_s.transform_point(&in_target), k).ok()?;
    let inv = sample_inverse_depth(source_depth, &q)?;
    if !(inv > 0.0) {
        return None;
    }
    let in_source = unproject(&q, 1.0 / inv, k).ok()?;
    let (back, z) = project(&pose_s_to_t.transform_point(&in_source), k).ok()?;
    Some((back, z))
}

/// Combines pair reports into one observation of the target view.
///
/// A pixel survives only if every report passes it. The inverse-depth
/// variance is `(kappa / (f * b_min))^2` where `kappa` is the largest
/// round-trip error over the reports clamped to `[0.5, e1]` px, `f` the mean
/// focal length and `b_min` the shortest baseline.
pub fn fuse_checks(reports: &[ConsistencyReport], target_depth: &DepthField) -> Result<Observation> {
    let first = reports
        .first()
        .ok_or_else(|| Error::InvalidArgument("no consistency reports".into()))?;
    let dims = target_depth.dims();
    for r in reports {
        r.mask.ensure_dims(dims)?;
    }
    let b_min = reports.iter().map(|r| r.baseline).fold(f64::INFINITY, f64::min);
    if !(b_min > 0.0) {
        return Err(Error::Degenerate("zero baseline between target and source".into()));
    }
    let focal = first.focal;
    let e1 = reports.iter().map(|r| r.thresholds.e1).fold(f64::INFINITY, f64::min);
    let kappa_max = e1.max(MIN_MATCH_ERROR_PX);

    let (w, h) = dims;
    let mut inv_depth = Grid::filled(w, h, f64::NAN);
    let mut variance = Grid::filled(w, h, f64::NAN);
    let mut mask = Grid::filled(w, h, false);
    for i in 0..w * h {
        let Some(d) = target_depth.at_index(i) else {
            continue;
        };
        if !reports.iter().all(|r| r.mask[i]) {
            continue;
        }
        let worst = reports.iter().map(|r| r.e_dist[i]).fold(0.0, f64::max);
        let kappa = worst.clamp(MIN_MATCH_ERROR_PX, kappa_max);
        let tau = kappa / (focal * b_min);
        inv_depth[i] = 1.0 / d;
        variance[i] = tau * tau;
        mask[i] = true;
    }
    Observation::new(inv_depth, variance, mask)
}
