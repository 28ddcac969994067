//! Straight-line minimum-jerk approach, the accept/reject-and-label rule, and
//! per-frame pose sampling.

use nalgebra::UnitQuaternion;
use thiserror::Error;

use crate::geometry::{
    orient_toward, segment_vs_box, segment_vs_mesh, slerp, GeometryError, HitTarget, RigidTransform, SegmentHit, Vec3,
};
use crate::scene::{target_point, SceneInstance};
use crate::taxonomy::{GraspType, ObjectSpec, PartSpec, PreShape};

/// Above this |n·z| the face is treated as horizontal and the roll reference
/// switches from world up to the horizontal approach direction.
const HORIZONTAL_FACE_COS: f64 = 0.9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrajectoryError {
    #[error("tau {0} outside [0, 1]")]
    TauOutOfRange(f64),
    #[error("invalid trajectory parameter: {0}")]
    InvalidParameter(String),
    #[error("truncation at {t_contact} would leave {remaining} frame(s), need at least 2")]
    Degenerate { t_contact: f64, remaining: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// `s(tau) = 10 tau^3 - 15 tau^4 + 6 tau^5`.
pub fn min_jerk_s(tau: f64) -> Result<f64, TrajectoryError> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(TrajectoryError::TauOutOfRange(tau));
    }
    Ok(quintic(tau))
}

fn quintic(t: f64) -> f64 {
    t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
}

/// ds/dtau.
pub fn min_jerk_velocity(tau: f64) -> f64 {
    30.0 * tau * tau * (1.0 - tau) * (1.0 - tau)
}

/// d²s/dtau².
pub fn min_jerk_acceleration(tau: f64) -> f64 {
    60.0 * tau * (1.0 - tau) * (1.0 - 2.0 * tau)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeScaling {
    Linear,
    CubicSmoothstep,
    Quintic,
}

impl TimeScaling {
    pub fn eval(self, tau: f64) -> f64 {
        match self {
            TimeScaling::Linear => tau,
            TimeScaling::CubicSmoothstep => tau * tau * (3.0 - 2.0 * tau),
            TimeScaling::Quintic => quintic(tau),
        }
    }
}

/// Σ (Δ³s / h³)² h over `n` grid points on [0, 1], padded with three rest
/// samples on each side so that boundary discontinuities are charged.
pub fn discrete_jerk_cost(scaling: TimeScaling, n: usize) -> f64 {
    assert!(n >= 2, "grid needs at least two points");
    let h = 1.0 / (n - 1) as f64;
    let samples: Vec<f64> = std::iter::repeat_n(0.0, 3)
        .chain((0..n).map(|i| scaling.eval(i as f64 * h)))
        .chain(std::iter::repeat_n(1.0, 3))
        .collect();
    samples
        .windows(4)
        .map(|w| {
            let d3 = (w[3] - 3.0 * w[2] + 3.0 * w[1] - w[0]) / (h * h * h);
            d3 * d3 * h
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanFrame {
    pub t_s: f64,
    /// Normalized path parameter `s(t / T)`.
    pub s: f64,
    /// Palm pose.
    pub pose: RigidTransform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPlan {
    pub start_pose: RigidTransform,
    pub end_point: Vec3,
    pub end_orientation: UnitQuaternion<f64>,
    pub duration_s: f64,
    pub fps: f64,
    pub frames: Vec<PlanFrame>,
}

impl TrajectoryPlan {
    /// Pose on the path at normalized parameter `s`.
    pub fn pose_at(&self, s: f64) -> RigidTransform {
        let p0 = self.start_pose.translation;
        RigidTransform::new(
            slerp(&self.start_pose.rotation, &self.end_orientation, s),
            p0 + (self.end_point - p0) * s,
        )
    }

    /// Pose the movement ends in, whether or not a frame lands on it.
    pub fn end_pose(&self) -> RigidTransform {
        RigidTransform::new(self.end_orientation, self.end_point)
    }
}

/// Palm orientation at the end of the approach to `target`: facing the
/// approach face, with roll taken from world up (or from the horizontal
/// approach direction for top and bottom faces, world +y if there is none).
pub fn end_orientation(
    scene: &SceneInstance,
    target: &PartSpec,
    start: &Vec3,
) -> Result<UnitQuaternion<f64>, TrajectoryError> {
    let n = scene.object_pose.transform_vector(&target.approach_normal()).normalize();
    let up = if n.z.abs() > HORIZONTAL_FACE_COS {
        let d = target_point(scene, target) - start;
        let horizontal = Vec3::new(d.x, d.y, 0.0);
        // straight down or up onto the target: the far side of the table is up
        if horizontal.norm() < 1e-9 {
            Vec3::y()
        } else {
            horizontal
        }
    } else {
        Vec3::z()
    };
    Ok(orient_toward(&n, &up)?)
}

/// Frames at `t = k / fps` for `k = 0..=floor(T * fps)`.
pub fn plan_trajectory(
    scene: &SceneInstance,
    target: &PartSpec,
    start: &RigidTransform,
    duration_s: f64,
    fps: f64,
) -> Result<TrajectoryPlan, TrajectoryError> {
    if !(duration_s.is_finite() && duration_s > 0.0) {
        return Err(TrajectoryError::InvalidParameter(format!("duration {duration_s}")));
    }
    if !(fps.is_finite() && fps > 0.0) {
        return Err(TrajectoryError::InvalidParameter(format!("fps {fps}")));
    }
    let end_point = target_point(scene, target);
    let mut plan = TrajectoryPlan {
        start_pose: *start,
        end_point,
        end_orientation: end_orientation(scene, target, &start.translation)?,
        duration_s,
        fps,
        frames: Vec::new(),
    };
    let last = (duration_s * fps + 1e-9).floor() as usize;
    plan.frames = (0..=last)
        .map(|k| {
            let t_s = k as f64 / fps;
            let s = quintic((t_s / duration_s).min(1.0));
            PlanFrame {
                t_s,
                s,
                pose: if k == 0 { *start } else { plan.pose_at(s) },
            }
        })
        .collect();
    Ok(plan)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AcceptanceStatus {
    Accepted,
    RejectedMeshFirst,
    RejectedWrongBox,
    RejectedNoContact,
}

impl AcceptanceStatus {
    pub fn name(self) -> &'static str {
        match self {
            AcceptanceStatus::Accepted => "accepted",
            AcceptanceStatus::RejectedMeshFirst => "rejected_mesh_first",
            AcceptanceStatus::RejectedWrongBox => "rejected_wrong_box",
            AcceptanceStatus::RejectedNoContact => "rejected_no_contact",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcceptanceOutcome {
    pub status: AcceptanceStatus,
    pub label: Option<(GraspType, PreShape)>,
    pub t_contact: Option<f64>,
}

/// First volume entered by the segment `p0 → p1` among the object's part
/// boxes and mesh, all placed at `pose`. Equal entry parameters resolve as
/// `prefer` box, then other boxes in part order, then the mesh.
pub fn first_hit(
    p0: &Vec3,
    p1: &Vec3,
    object: &ObjectSpec,
    pose: &RigidTransform,
    prefer: Option<usize>,
) -> Result<Option<SegmentHit>, GeometryError> {
    let rank = |target: HitTarget| match target {
        HitTarget::PartBox(i) if Some(i) == prefer => 0,
        HitTarget::PartBox(_) => 1,
        HitTarget::Mesh => 2,
    };
    let mut best: Option<SegmentHit> = None;
    let mut consider = |t: f64, target: HitTarget| {
        let better = match best {
            None => true,
            Some(b) => t < b.t_enter || (t == b.t_enter && rank(target) < rank(b.target)),
        };
        if better {
            best = Some(SegmentHit { t_enter: t, target });
        }
    };
    for (i, part) in object.parts.iter().enumerate() {
        if let Some(t) = segment_vs_box(p0, p1, &part.bbox.transformed(pose))? {
            consider(t, HitTarget::PartBox(i));
        }
    }
    if let Some(t) = segment_vs_mesh(p0, p1, &object.mesh, pose)? {
        consider(t, HitTarget::Mesh);
    }
    Ok(best)
}

/// Applies the labeling rule to the straight palm path of `plan`.
pub fn check_acceptance(
    plan: &TrajectoryPlan,
    scene: &SceneInstance,
    object: &ObjectSpec,
    target: &PartSpec,
) -> Result<AcceptanceOutcome, TrajectoryError> {
    let target_idx = object
        .parts
        .iter()
        .position(|p| p.part_id == target.part_id)
        .ok_or_else(|| TrajectoryError::InvalidParameter(format!("{} has no part {}", object.name, target.part_id)))?;
    let hit = first_hit(&plan.start_pose.translation, &plan.end_point, object, &scene.object_pose, Some(target_idx))?;
    let rejected = |status| AcceptanceOutcome {
        status,
        label: None,
        t_contact: None,
    };
    Ok(match hit {
        Some(SegmentHit {
            t_enter,
            target: HitTarget::PartBox(i),
        }) if i == target_idx => AcceptanceOutcome {
            status: AcceptanceStatus::Accepted,
            label: Some((target.grasp_type, target.grasp_type.reference_preshape())),
            t_contact: Some(t_enter),
        },
        Some(SegmentHit {
            target: HitTarget::PartBox(_),
            ..
        }) => rejected(AcceptanceStatus::RejectedWrongBox),
        Some(SegmentHit {
            target: HitTarget::Mesh, ..
        }) => rejected(AcceptanceStatus::RejectedMeshFirst),
        None => rejected(AcceptanceStatus::RejectedNoContact),
    })
}

/// Keeps frames whose path parameter is strictly below `t_contact`.
pub fn truncate_at_contact(plan: &TrajectoryPlan, t_contact: f64) -> Result<TrajectoryPlan, TrajectoryError> {
    if !(t_contact > 0.0 && t_contact <= 1.0) {
        return Err(TrajectoryError::InvalidParameter(format!("t_contact {t_contact} outside (0, 1]")));
    }
    let frames: Vec<PlanFrame> = plan.frames.iter().copied().take_while(|f| f.s < t_contact).collect();
    if frames.len() < 2 {
        return Err(TrajectoryError::Degenerate {
            t_contact,
            remaining: frames.len(),
        });
    }
    Ok(TrajectoryPlan {
        frames,
        ..plan.clone()
    })
}
