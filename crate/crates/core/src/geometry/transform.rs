use nalgebra::{Quaternion, UnitQuaternion};

use super::{GeometryError, Vec3};

/// Flips the sign of `q` so that its scalar part is non-negative.
pub fn canonical(q: UnitQuaternion<f64>) -> UnitQuaternion<f64> {
    if q.w < 0.0 {
        UnitQuaternion::new_unchecked(-q.into_inner())
    } else {
        q
    }
}

pub fn quat_to_wxyz(q: &UnitQuaternion<f64>) -> [f64; 4] {
    [q.w, q.i, q.j, q.k]
}

/// Builds a unit quaternion from `(w, x, y, z)`, accepting inputs whose norm
/// is within `tol` of one and renormalizing them.
pub fn quat_from_wxyz(wxyz: [f64; 4], tol: f64) -> Result<UnitQuaternion<f64>, GeometryError> {
    let q = Quaternion::new(wxyz[0], wxyz[1], wxyz[2], wxyz[3]);
    let norm = q.norm();
    if !norm.is_finite() || (norm - 1.0).abs() > tol {
        return Err(GeometryError::NotUnitQuaternion(norm));
    }
    Ok(UnitQuaternion::from_quaternion(q))
}

/// A proper rigid motion: rotate, then translate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: UnitQuaternion<f64>,
    pub translation: Vec3,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn new(rotation: UnitQuaternion<f64>, translation: Vec3) -> Self {
        Self {
            rotation: canonical(rotation),
            translation,
        }
    }

    pub fn identity() -> Self {
        Self {
            rotation: UnitQuaternion::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn from_translation(translation: Vec3) -> Self {
        Self::new(UnitQuaternion::identity(), translation)
    }

    /// `self ∘ other`: maps a point first through `other`, then through `self`.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform::new(
            self.rotation * other.rotation,
            self.rotation * other.translation + self.translation,
        )
    }

    pub fn inverse(&self) -> RigidTransform {
        let inv = self.rotation.inverse();
        RigidTransform::new(inv, -(inv * self.translation))
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    pub fn transform_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation * v
    }

    pub fn inverse_transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation.inverse_transform_vector(&(p - self.translation))
    }

    pub fn inverse_transform_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation.inverse_transform_vector(v)
    }

    /// World direction of the frame's +Z (optical / palm-normal) axis.
    pub fn forward(&self) -> Vec3 {
        self.rotation * Vec3::z()
    }

    /// `[px, py, pz, qw, qx, qy, qz]` with `qw >= 0`.
    pub fn to_array7(&self) -> [f64; 7] {
        let q = canonical(self.rotation);
        let t = &self.translation;
        [t.x, t.y, t.z, q.w, q.i, q.j, q.k]
    }

    pub fn from_array7(v: [f64; 7], tol: f64) -> Result<Self, GeometryError> {
        let q = quat_from_wxyz([v[3], v[4], v[5], v[6]], tol)?;
        Ok(Self::new(q, Vec3::new(v[0], v[1], v[2])))
    }
}
