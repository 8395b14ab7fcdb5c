use nalgebra::Vector2;

use super::{project, unproject, Intrinsics, RigidTransform};
use crate::error::{Error, Result};
use crate::photometrics::Image;
use crate::Grid;

/// Dense metric depth with a validity mask.
///
/// Values under an unset mask bit are never read.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthField {
    values: Grid<f64>,
    mask: Grid<bool>,
}

impl DepthField {
    /// Fails if a masked value is not finite and positive.
    pub fn new(values: Grid<f64>, mask: Grid<bool>) -> Result<Self> {
        mask.ensure_dims(values.dims())?;
        for (i, (&v, &m)) in values.iter().zip(mask.iter()).enumerate() {
            if m && !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "masked depth at index {i} is {v}"
                )));
            }
        }
        Ok(Self { values, mask })
    }

    /// Masks every finite positive value; everything else is invalid.
    pub fn from_values(values: Grid<f64>) -> Self {
        let mask = values.map(|v| v.is_finite() && *v > 0.0);
        Self { values, mask }
    }

    /// Fully valid constant field.
    pub fn constant(width: usize, height: usize, depth: f64) -> Result<Self> {
        Self::new(
            Grid::filled(width, height, depth),
            Grid::filled(width, height, true),
        )
    }

    pub fn width(&self) -> usize {
        self.values.width()
    }

    pub fn height(&self) -> usize {
        self.values.height()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.values.dims()
    }

    pub fn values(&self) -> &Grid<f64> {
        &self.values
    }

    pub fn mask(&self) -> &Grid<bool> {
        &self.mask
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> Option<f64> {
        let i = self.values.index_of(x, y);
        self.at_index(i)
    }

    #[inline]
    pub fn at_index(&self, i: usize) -> Option<f64> {
        if self.mask[i] {
            Some(self.values[i])
        } else {
            None
        }
    }

    pub fn valid_count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }

    /// Values with invalid pixels replaced by NaN.
    pub fn to_nan_masked(&self) -> Grid<f64> {
        Grid::from_fn(self.width(), self.height(), |x, y| self.at(x, y).unwrap_or(f64::NAN))
    }

    /// Multiplies every valid depth by `factor` (> 0).
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.values.map(|v| v * factor), self.mask.clone())
    }
}

/// Bilinearly interpolates inverse depth at a sub-pixel location.
///
/// Inverse depth is affine in image coordinates over a planar surface, so the
/// interpolation is exact inside planar regions. Returns `None` outside
/// `[0, W-1] x [0, H-1]` or when any of the four taps is invalid.
pub fn sample_inverse_depth(field: &DepthField, pixel: &Vector2<f64>) -> Option<f64> {
    let (w, h) = field.dims();
    let (u, v) = (pixel.x, pixel.y);
    if !(u >= 0.0 && v >= 0.0 && u <= (w - 1) as f64 && v <= (h - 1) as f64) {
        return None;
    }
    let (x0, fx) = split_coordinate(u, w);
    let (y0, fy) = split_coordinate(v, h);
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let z00 = 1.0 / field.at(x0, y0)?;
    let z10 = 1.0 / field.at(x1, y0)?;
    let z01 = 1.0 / field.at(x0, y1)?;
    let z11 = 1.0 / field.at(x1, y1)?;
    let top = z00 + fx * (z10 - z00);
    let bottom = z01 + fx * (z11 - z01);
    Some(top + fy * (bottom - top))
}

/// Integer tap and fractional weight; the last row/column is reached with
/// weight 1 on the previous tap so the border stays sampleable.
fn split_coordinate(c: f64, len: usize) -> (usize, f64) {
    if len == 1 {
        return (0, 0.0);
    }
    let i = (c.floor() as usize).min(len - 2);
    (i, c - i as f64)
}

/// Forward-warps a depth map into another view.
///
/// Every valid source pixel is back-projected, moved by `pose_s_to_t` and
/// rasterised to the nearest target pixel. Collisions keep the smaller depth;
/// source pixels are scanned in row-major order and only a strictly smaller
/// depth replaces an earlier write, so the result does not depend on
/// scheduling.
pub fn warp_depth(
    source_depth: &DepthField,
    pose_s_to_t: &RigidTransform,
    k: &Intrinsics,
) -> DepthField {
    let (w, h) = source_depth.dims();
    let mut values = Grid::filled(w, h, f64::INFINITY);
    let mut mask = Grid::filled(w, h, false);
    for y in 0..h {
        for x in 0..w {
            let Some(d) = source_depth.at(x, y) else {
                continue;
            };
            let Ok(p) = unproject(&Vector2::new(x as f64, y as f64), d, k) else {
                continue;
            };
            let Ok((px, z)) = project(&pose_s_to_t.transform_point(&p), k) else {
                continue;
            };
            if !in_bounds(&px, w, h) {
                continue;
            }
            let tx = (px.x + 0.5).floor() as usize;
            let ty = (px.y + 0.5).floor() as usize;
            let slot = values.get_mut(tx, ty);
            if z < *slot {
                *slot = z;
                *mask.get_mut(tx, ty) = true;
            }
        }
    }
    for (v, m) in values.as_mut_slice().iter_mut().zip(mask.iter()) {
        if !m {
            *v = f64::NAN;
        }
    }
    DepthField { values, mask }
}

fn in_bounds(px: &Vector2<f64>, w: usize, h: usize) -> bool {
    px.x >= -0.5 && px.y >= -0.5 && px.x < w as f64 - 0.5 && px.y < h as f64 - 0.5
}

/// Inverse-warps `source` into the target view using the target depth.
///
/// Returns the warped image and a mask of pixels that found a bilinear
/// sample inside the source image.
pub fn warp_image(
    source: &Image,
    target_depth: &DepthField,
    pose_t_to_s: &RigidTransform,
    k: &Intrinsics,
) -> Result<(Image, Grid<bool>)> {
    let (w, h) = target_depth.dims();
    let mut out = Image::zeros(w, h, source.channels());
    let mut mask = Grid::filled(w, h, false);
    let mut sample = vec![0.0; source.channels()];
    for y in 0..h {
        for x in 0..w {
            let Some(d) = target_depth.at(x, y) else {
                continue;
            };
            let p = unproject(&Vector2::new(x as f64, y as f64), d, k)?;
            let Ok((px, _)) = project(&pose_t_to_s.transform_point(&p), k) else {
                continue;
            };
            if source.sample_bilinear(px.x, px.y, &mut sample) {
                out.pixel_mut(x, y).copy_from_slice(&sample);
                *mask.get_mut(x, y) = true;
            }
        }
    }
    Ok((out, mask))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;

    fn k() -> Intrinsics {
        Intrinsics::new(50.0, 50.0, 31.5, 23.5, 64, 48).unwrap()
    }

    #[test]
    fn identity_warp_is_identity() {
        let field = DepthField::from_values(Grid::from_fn(64, 48, |x, y| {
            if (x + y) % 7 == 0 {
                f64::NAN
            } else {
                1.0 + 0.01 * (x * y) as f64
            }
        }));
        let warped = warp_depth(&field, &RigidTransform::identity(), &k());
        for i in 0..field.values().len() {
            assert_eq!(warped.at_index(i), field.at_index(i));
        }
    }

    #[test]
    fn forward_translation_of_fronto_parallel_plane() {
        let field = DepthField::constant(64, 48, 2.0).unwrap();
        let pose = RigidTransform::from_translation(Vector3::new(0.0, 0.0, -0.5));
        let warped = warp_depth(&field, &pose, &k());
        assert!(warped.valid_count() > 0);
        for i in 0..warped.values().len() {
            if let Some(d) = warped.at_index(i) {
                assert!((d - 1.5).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn z_buffer_keeps_nearest() {
        // Two source pixels collapse on the optical axis when the camera
        // steps far back; the nearer one must win regardless of scan order.
        let mut values = Grid::filled(64, 48, f64::NAN);
        *values.get_mut(31, 23) = 5.0;
        *values.get_mut(33, 25) = 4.0;
        let field = DepthField::from_values(values);
        let pose = RigidTransform::from_translation(Vector3::new(0.0, 0.0, 1000.0));
        // Principal point on a pixel centre so both land on pixel (32, 24).
        let k = Intrinsics::new(50.0, 50.0, 32.0, 24.0, 64, 48).unwrap();
        let warped = warp_depth(&field, &pose, &k);
        assert_eq!(warped.valid_count(), 1);
        let d = warped.values().iter().cloned().find(|v| v.is_finite()).unwrap();
        assert!((d - 1004.0).abs() < 1e-9);
    }

    #[test]
    fn bilinear_inverse_depth_is_exact_on_planes() {
        // Plane z = 4 + 0.5 x in camera coordinates.
        let k = k();
        let field = DepthField::from_values(Grid::from_fn(64, 48, |x, _| {
            let ray_x = (x as f64 - k.cx) / k.fx;
            4.0 / (1.0 - 0.5 * ray_x)
        }));
        let px = Vector2::new(20.37, 11.81);
        let ray_x = (px.x - k.cx) / k.fx;
        let expected = (1.0 - 0.5 * ray_x) / 4.0;
        let got = sample_inverse_depth(&field, &px).unwrap();
        assert!((got - expected).abs() < 1e-12);
        assert!(sample_inverse_depth(&field, &Vector2::new(63.0, 47.0)).is_some());
        assert!(sample_inverse_depth(&field, &Vector2::new(63.01, 47.0)).is_none());
        assert!(sample_inverse_depth(&field, &Vector2::new(-0.01, 4.0)).is_none());
    }

    #[test]
    fn bilinear_rejects_invalid_taps() {
        let mut values = Grid::filled(8, 8, 1.0);
        *values.get_mut(3, 3) = f64::NAN;
        let field = DepthField::from_values(values);
        assert!(sample_inverse_depth(&field, &Vector2::new(2.5, 2.5)).is_none());
        assert!(sample_inverse_depth(&field, &Vector2::new(4.0, 4.0)).is_some());
    }

    #[test]
    fn new_rejects_bad_masked_values() {
        let values = Grid::filled(2, 2, -1.0);
        assert!(DepthField::new(values.clone(), Grid::filled(2, 2, true)).is_err());
        assert!(DepthField::new(values, Grid::filled(2, 2, false)).is_ok());
    }
}
