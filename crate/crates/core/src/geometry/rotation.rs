use nalgebra::{Matrix3, Rotation3, UnitQuaternion};

use super::{canonical, GeometryError, Vec3};

const UNIT_TOL: f64 = 1e-6;

/// Palm/camera orientation facing a surface with outward normal
/// `face_normal`: the frame's +Z axis is `-face_normal`, and the frame's -Y
/// axis ("up" in the image) is the component of `up_hint` orthogonal to it.
pub fn orient_toward(face_normal: &Vec3, up_hint: &Vec3) -> Result<UnitQuaternion<f64>, GeometryError> {
    let n_norm = face_normal.norm();
    if (n_norm - 1.0).abs() > UNIT_TOL {
        return Err(GeometryError::NotUnit(n_norm));
    }
    let forward = -face_normal / n_norm;
    let up_perp = up_hint - forward * up_hint.dot(&forward);
    if up_perp.norm() < 1e-9 * up_hint.norm().max(1.0) {
        return Err(GeometryError::DegenerateRoll);
    }
    let down = -up_perp.normalize();
    let right = down.cross(&forward);
    let basis = Matrix3::from_columns(&[right, down, forward]);
    let rot = Rotation3::from_matrix_unchecked(basis);
    Ok(canonical(UnitQuaternion::from_rotation_matrix(&rot)))
}

/// Orientation at `eye` whose forward axis passes through `target`.
pub fn look_at(eye: &Vec3, target: &Vec3, up_hint: &Vec3) -> Result<UnitQuaternion<f64>, GeometryError> {
    let dir = target - eye;
    let len = dir.norm();
    if len == 0.0 {
        return Err(GeometryError::DegenerateSegment);
    }
    orient_toward(&(-dir / len), up_hint)
}

/// Shortest-arc spherical interpolation between unit quaternions.
pub fn slerp(q0: &UnitQuaternion<f64>, q1: &UnitQuaternion<f64>, s: f64) -> UnitQuaternion<f64> {
    let a = q0.coords;
    let mut b = q1.coords;
    let mut dot = a.dot(&b);
    if dot < 0.0 {
        b = -b;
        dot = -dot;
    }
    if s <= 0.0 {
        return *q0;
    }
    if s >= 1.0 {
        return UnitQuaternion::new_normalize(nalgebra::Quaternion::from(b));
    }
    let coords = if dot > 1.0 - 1e-12 {
        a * (1.0 - s) + b * s
    } else {
        let theta = dot.min(1.0).acos();
        let sin_theta = theta.sin();
        a * (((1.0 - s) * theta).sin() / sin_theta) + b * ((s * theta).sin() / sin_theta)
    };
    UnitQuaternion::new_normalize(nalgebra::Quaternion::from(coords))
}

/// Geodesic angle in radians between two rotations.
pub fn angle_between(q0: &UnitQuaternion<f64>, q1: &UnitQuaternion<f64>) -> f64 {
    let d = q0.inverse() * q1;
    2.0 * d.imag().norm().atan2(d.w.abs())
}
