use nalgebra::{Vector2, Vector3};

use crate::error::{Error, Result};

/// Pinhole intrinsics without distortion.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        let k = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidIntrinsics(msg));
        if !(self.fx.is_finite() && self.fx > 0.0 && self.fy.is_finite() && self.fy > 0.0) {
            return bad(format!("focal lengths must be positive, got fx={} fy={}", self.fx, self.fy));
        }
        if self.width == 0 || self.height == 0 {
            return bad(format!("empty image size {}x{}", self.width, self.height));
        }
        if !(self.cx >= 0.0 && self.cx < self.width as f64) {
            return bad(format!("cx={} outside [0, {})", self.cx, self.width));
        }
        if !(self.cy >= 0.0 && self.cy < self.height as f64) {
            return bad(format!("cy={} outside [0, {})", self.cy, self.height));
        }
        Ok(())
    }

    /// Mean focal length `(fx + fy) / 2`.
    pub fn mean_focal(&self) -> f64 {
        0.5 * (self.fx + self.fy)
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// True if the continuous pixel coordinate rasterises inside the image.
    pub fn contains(&self, pixel: &Vector2<f64>) -> bool {
        pixel.x >= -0.5
            && pixel.y >= -0.5
            && pixel.x < self.width as f64 - 0.5
            && pixel.y < self.height as f64 - 0.5
    }
}

/// Projects a camera-frame point, returning the pixel and its depth.
pub fn project(point: &Vector3<f64>, k: &Intrinsics) -> Result<(Vector2<f64>, f64)> {
    let z = point.z;
    if !(z > 0.0) {
        return Err(Error::BehindCamera(z));
    }
    let pixel = Vector2::new(k.fx * point.x / z + k.cx, k.fy * point.y / z + k.cy);
    Ok((pixel, z))
}

/// Back-projects a pixel at metric depth `depth` into the camera frame.
pub fn unproject(pixel: &Vector2<f64>, depth: f64, k: &Intrinsics) -> Result<Vector3<f64>> {
    if !(depth > 0.0) || !depth.is_finite() {
        return Err(Error::NonPositiveDepth(depth));
    }
    Ok(Vector3::new(
        (pixel.x - k.cx) * depth / k.fx,
        (pixel.y - k.cy) * depth / k.fy,
        depth,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn k() -> Intrinsics {
        Intrinsics::new(100.0, 100.0, 320.0, 96.0, 640, 192).unwrap()
    }

    #[test]
    fn optical_axis_maps_to_principal_point() {
        let (px, d) = project(&Vector3::new(0.0, 0.0, 2.0), &k()).unwrap();
        assert_eq!(px, Vector2::new(320.0, 96.0));
        assert_eq!(d, 2.0);
    }

    #[test]
    fn unit_offset_scaled_by_focal() {
        let (px, _) = project(&Vector3::new(1.0, 0.0, 1.0), &k()).unwrap();
        assert_eq!(px, Vector2::new(420.0, 96.0));
        assert_eq!(unproject(&Vector2::new(320.0, 96.0), 2.0, &k()).unwrap(), Vector3::new(0.0, 0.0, 2.0));
        assert_eq!(unproject(&Vector2::new(420.0, 96.0), 1.0, &k()).unwrap(), Vector3::new(1.0, 0.0, 1.0));
    }

    #[test]
    fn rejects_points_behind_camera() {
        assert!(matches!(project(&Vector3::new(0.0, 0.0, 0.0), &k()), Err(Error::BehindCamera(_))));
        assert!(matches!(project(&Vector3::new(1.0, 0.0, -1.0), &k()), Err(Error::BehindCamera(_))));
        assert!(matches!(unproject(&Vector2::new(1.0, 1.0), 0.0, &k()), Err(Error::NonPositiveDepth(_))));
        assert!(unproject(&Vector2::new(1.0, 1.0), -3.0, &k()).is_err());
    }

    #[test]
    fn invalid_intrinsics() {
        assert!(Intrinsics::new(0.0, 1.0, 1.0, 1.0, 4, 4).is_err());
        assert!(Intrinsics::new(1.0, 1.0, 4.0, 1.0, 4, 4).is_err());
        assert!(Intrinsics::new(1.0, 1.0, -0.1, 1.0, 4, 4).is_err());
        assert!(Intrinsics::new(1.0, 1.0, 1.0, 1.0, 0, 4).is_err());
    }

    #[test]
    fn unproject_project_random_points() {
        let k = k();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let p = Vector3::new(
                rng.random_range(-20.0..20.0),
                rng.random_range(-5.0..5.0),
                rng.random_range(0.1..80.0),
            );
            let (px, d) = project(&p, &k).unwrap();
            let q = unproject(&px, d, &k).unwrap();
            assert!((q - p).norm() < 1e-9, "{p} -> {q}");
        }
    }

    #[test]
    fn project_unproject_grid() {
        let k = Intrinsics::new(57.3, 61.1, 31.5, 30.2, 64, 64).unwrap();
        for v in 0..64 {
            for u in 0..64 {
                let px = Vector2::new(u as f64, v as f64);
                let depth = 0.5 + 0.37 * ((u * 7 + v * 3) % 11) as f64;
                let (back, d) = project(&unproject(&px, depth, &k).unwrap(), &k).unwrap();
                assert!((back - px).norm() < 1e-9);
                assert_eq!(d, depth);
            }
        }
    }
}
