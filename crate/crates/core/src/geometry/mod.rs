//! Rigid transforms, oriented boxes, triangle meshes and the segment queries
//! used for collision labeling and rendering.
//!
//! Frame convention used everywhere in the crate: the camera/palm frame has
//! +Z forward along the optical axis (coincident with the palm normal), +X to
//! the right and +Y down. The world frame is Z-up with the floor at z = 0.

mod mesh;
mod obb;
mod rotation;
mod transform;

pub use mesh::{segment_vs_mesh, ObjError, TriangleMesh, WatertightRay};
pub use obb::{segment_vs_box, OrientedBox};
pub use rotation::{angle_between, look_at, orient_toward, slerp};
pub use transform::{canonical, quat_from_wxyz, quat_to_wxyz, RigidTransform};

use nalgebra::Vector3;
use thiserror::Error;

pub type Vec3 = Vector3<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("degenerate segment: start and end points coincide")]
    DegenerateSegment,
    #[error("up hint is parallel to the face normal, roll is undefined")]
    DegenerateRoll,
    #[error("vector is not unit length (norm {0})")]
    NotUnit(f64),
    #[error("quaternion is not unit length (norm {0})")]
    NotUnitQuaternion(f64),
    #[error("half extents must be strictly positive, got {0:?}")]
    NonPositiveExtents([f64; 3]),
    #[error("triangle {triangle} references vertex {index} but mesh has {count} vertices")]
    IndexOutOfRange {
        triangle: usize,
        index: usize,
        count: usize,
    },
    #[error("mesh has no triangles left after cleanup")]
    EmptyMesh,
}

/// What a segment ran into first.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HitTarget {
    /// Part box, by index into the object's part list.
    PartBox(usize),
    Mesh,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentHit {
    /// Segment parameter in [0, 1] at which the target is entered.
    pub t_enter: f64,
    pub target: HitTarget,
}

/// Outward normal of box face `face` in the box frame.
///
/// Faces are numbered +X, -X, +Y, -Y, +Z, -Z.
pub fn face_axis(face: u8) -> Option<Vec3> {
    Some(match face {
        0 => Vec3::x(),
        1 => -Vec3::x(),
        2 => Vec3::y(),
        3 => -Vec3::y(),
        4 => Vec3::z(),
        5 => -Vec3::z(),
        _ => return None,
    })
}
