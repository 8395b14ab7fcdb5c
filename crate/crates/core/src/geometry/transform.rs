use nalgebra::{Matrix3, Matrix3x4, Vector3};

use crate::error::{Error, Result};

const ORTHONORMAL_TOL: f64 = 1e-9;

/// Element of SE(3) mapping points `p` to `R p + t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Fails unless `rotation` is orthonormal with determinant +1 within 1e-9.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        let dev = orthonormality_error(&rotation);
        if !(dev <= ORTHONORMAL_TOL) {
            return Err(Error::InvalidTransform(format!(
                "rotation is not orthonormal (max |R^T R - I| = {dev:e})"
            )));
        }
        let det = rotation.determinant();
        if !((det - 1.0).abs() <= ORTHONORMAL_TOL) {
            return Err(Error::InvalidTransform(format!("det(R) = {det}")));
        }
        if !translation.iter().all(|t| t.is_finite()) {
            return Err(Error::InvalidTransform("non-finite translation".into()));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation,
        }
    }

    /// Rotation about a unit axis by `angle` radians (Rodrigues) followed by a translation.
    pub fn from_axis_angle(axis: Vector3<f64>, angle: f64, translation: Vector3<f64>) -> Self {
        let rotation = match nalgebra::Unit::try_new(axis, 1e-12) {
            Some(axis) => *nalgebra::Rotation3::from_axis_angle(&axis, angle).matrix(),
            None => Matrix3::identity(),
        };
        Self {
            rotation,
            translation,
        }
    }

    /// Builds a transform from an approximate rotation by projecting it onto
    /// SO(3) (closest rotation in Frobenius norm).
    pub fn from_approximate(rotation: &Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        Self::new(nearest_rotation(rotation)?, translation)
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    /// Row-major `[R | t]`.
    pub fn to_matrix3x4(&self) -> Matrix3x4<f64> {
        let mut m = Matrix3x4::zeros();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    #[inline]
    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// Length of the translation; the camera baseline when the transform is
    /// a relative pose.
    pub fn baseline(&self) -> f64 {
        self.translation.norm()
    }

    pub fn orthonormality_error(&self) -> f64 {
        orthonormality_error(&self.rotation)
    }
}

/// Max absolute entry of `RᵀR − I`.
pub(crate) fn orthonormality_error(r: &Matrix3<f64>) -> f64 {
    (r.transpose() * r - Matrix3::identity()).amax()
}

pub(crate) fn nearest_rotation(m: &Matrix3<f64>) -> Result<Matrix3<f64>> {
    if !m.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidTransform("non-finite rotation".into()));
    }
    let svd = m.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::InvalidTransform("SVD failed".into())),
    };
    let mut d = Matrix3::identity();
    if (u * v_t).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    Ok(u * d * v_t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_transform() -> impl Strategy<Value = RigidTransform> {
        (
            prop::array::uniform3(-1.0f64..1.0),
            -3.2f64..3.2,
            prop::array::uniform3(-10.0f64..10.0),
        )
            .prop_map(|(axis, angle, t)| {
                let axis = Vector3::from(axis) + Vector3::new(1e-3, 0.0, 0.0);
                RigidTransform::from_axis_angle(axis, angle, Vector3::from(t))
            })
    }

    fn close(a: &RigidTransform, b: &RigidTransform, tol: f64) -> bool {
        (a.rotation - b.rotation).amax() < tol && (a.translation - b.translation).amax() < tol
    }

    #[test]
    fn identity_is_neutral() {
        let b = RigidTransform::from_axis_angle(Vector3::y(), 0.3, Vector3::new(1.0, 2.0, 3.0));
        assert_eq!(RigidTransform::identity().compose(&b), b);
    }

    #[test]
    fn rejects_non_rotations() {
        let mut r = Matrix3::identity();
        r[(0, 0)] = 1.01;
        assert!(RigidTransform::new(r, Vector3::zeros()).is_err());
        let reflection = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        assert!(RigidTransform::new(reflection, Vector3::zeros()).is_err());
    }

    #[test]
    fn nearest_rotation_repairs_noise() {
        let base = RigidTransform::from_axis_angle(Vector3::new(0.2, 1.0, 0.1), 0.4, Vector3::zeros());
        let noisy = base.rotation() + Matrix3::from_element(1e-5);
        let fixed = RigidTransform::from_approximate(&noisy, Vector3::zeros()).unwrap();
        assert!(fixed.orthonormality_error() < 1e-12);
        assert!((fixed.rotation() - base.rotation()).amax() < 1e-4);
    }

    #[test]
    fn long_composition_chain_stays_orthonormal() {
        let step = RigidTransform::from_axis_angle(Vector3::new(0.3, -0.7, 0.2), 0.37, Vector3::new(0.1, 0.0, 0.5));
        let mut acc = RigidTransform::identity();
        for _ in 0..100 {
            acc = acc.compose(&step);
        }
        assert!(acc.orthonormality_error() < 1e-7);
        assert!((acc.rotation().determinant() - 1.0).abs() < 1e-7);
    }

    proptest! {
        #[test]
        fn compose_with_inverse_is_identity(a in arb_transform()) {
            prop_assert!(close(&a.compose(&a.inverse()), &RigidTransform::identity(), 1e-9));
            prop_assert!(close(&a.inverse().compose(&a), &RigidTransform::identity(), 1e-9));
        }

        #[test]
        fn composition_is_associative(a in arb_transform(), b in arb_transform(), c in arb_transform()) {
            let left = a.compose(&b).compose(&c);
            let right = a.compose(&b.compose(&c));
            prop_assert!(close(&left, &right, 1e-9));
        }

        #[test]
        fn rotation_preserves_norm(a in arb_transform(), p in prop::array::uniform3(-50.0f64..50.0)) {
            let rot_only = RigidTransform::new(*a.rotation(), Vector3::zeros()).unwrap();
            let p = Vector3::from(p);
            prop_assert!((rot_only.transform_point(&p).norm() - p.norm()).abs() < 1e-9);
        }
    }
}
