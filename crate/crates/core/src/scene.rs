//! Randomized scene instances: room textures, lighting, object pose on the
//! table, and the start pose of the approach.
//!
//! World layout: floor at z = 0, room centered on the origin, table centered
//! on the origin with its top at `table_top_height`. Approaches start from
//! the -y side of the table.

use std::fmt::Write as _;

use nalgebra::UnitQuaternion;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{look_at, GeometryError, RigidTransform, Vec3};
use crate::render::{view_has_object_and_background, CameraIntrinsics, Stage};
use crate::rng::{stream_rng, SCENE_STREAM, START_POSE_STREAM};
use crate::taxonomy::{ObjectSpec, PartSpec};
use crate::textfmt::g9;

/// Visibility resampling budget inside [`sample_start_pose`].
pub const START_POSE_RETRIES: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkspaceConfig {
    /// Room width (x), depth (y), height (z).
    pub room_extents: [f64; 3],
    pub table_top_height: f64,
    /// Table top width (x) and depth (y).
    pub table_extents: [f64; 2],
    /// Horizontal distance of the start plane from the -y table border.
    pub start_plane_distance: f64,
    /// Width (x) and height (z) of the start sampling window.
    pub start_plane_window: [f64; 2],
    /// Height of the window center above the table top.
    pub start_window_height: f64,
    /// Horizontal field of view.
    pub camera_fov_deg: f64,
    /// Width, height in pixels.
    pub image_size: [u32; 2],
    /// Camera position in the palm frame.
    pub camera_offset: [f64; 3],
}

impl WorkspaceConfig {
    pub fn validate(&self) -> Result<(), SceneError> {
        let lengths = [
            ("room_extents", self.room_extents.to_vec()),
            ("table_top_height", vec![self.table_top_height]),
            ("table_extents", self.table_extents.to_vec()),
            ("start_plane_distance", vec![self.start_plane_distance]),
            ("start_plane_window", self.start_plane_window.to_vec()),
            ("start_window_height", vec![self.start_window_height]),
        ];
        for (name, values) in lengths {
            if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return Err(SceneError::Config(format!("{name} must be positive, got {values:?}")));
            }
        }
        if !(self.camera_fov_deg > 10.0 && self.camera_fov_deg < 170.0) {
            return Err(SceneError::Config(format!("camera_fov_deg must be in (10, 170), got {}", self.camera_fov_deg)));
        }
        if self.image_size.contains(&0) {
            return Err(SceneError::Config("image_size must be non-zero".into()));
        }
        let plane_y = self.start_plane_y();
        if plane_y <= -self.room_extents[1] / 2.0 {
            return Err(SceneError::Config("start plane lies outside the room".into()));
        }
        let top = self.table_top_height + self.start_window_height + self.start_plane_window[1] / 2.0;
        if top >= self.room_extents[2] || self.table_top_height >= self.room_extents[2] {
            return Err(SceneError::Config("start window reaches above the ceiling".into()));
        }
        if self.start_window_height - self.start_plane_window[1] / 2.0 <= 0.0 {
            return Err(SceneError::Config("start window dips below the table top".into()));
        }
        Ok(())
    }

    pub fn intrinsics(&self) -> CameraIntrinsics {
        CameraIntrinsics {
            width: self.image_size[0],
            height: self.image_size[1],
            fov_deg: self.camera_fov_deg,
        }
    }

    pub fn camera_offset(&self) -> RigidTransform {
        RigidTransform::from_translation(Vec3::from(self.camera_offset))
    }

    /// y coordinate of the vertical start plane.
    pub fn start_plane_y(&self) -> f64 {
        -self.table_extents[1] / 2.0 - self.start_plane_distance
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomizationSpec {
    pub wall_textures: Vec<String>,
    pub floor_textures: Vec<String>,
    pub table_textures: Vec<String>,
    pub light_intensity_range: [f64; 2],
    /// Half-angle of the cone around straight down that light directions
    /// are drawn from.
    pub light_direction_cone_deg: f64,
    /// Object yaw interval `[lo, hi)` in degrees.
    pub object_yaw_range_deg: [f64; 2],
    /// Maximum |x|, |y| offset of the object from the table center.
    pub object_xy_jitter: [f64; 2],
}

impl RandomizationSpec {
    pub fn validate(&self) -> Result<(), SceneError> {
        for (name, pool) in [
            ("wall_textures", &self.wall_textures),
            ("floor_textures", &self.floor_textures),
            ("table_textures", &self.table_textures),
        ] {
            if pool.is_empty() {
                return Err(SceneError::Config(format!("{name} is empty")));
            }
            if let Some(bad) = pool.iter().find(|t| t.is_empty() || t.chars().any(|c| c.is_whitespace() || c == '=')) {
                return Err(SceneError::Config(format!("{name} has invalid texture id {bad:?}")));
            }
        }
        let intervals = [
            ("light_intensity_range", self.light_intensity_range),
            ("object_yaw_range_deg", self.object_yaw_range_deg),
        ];
        for (name, [lo, hi]) in intervals {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(SceneError::Config(format!("{name} must satisfy lo <= hi, got [{lo}, {hi}]")));
            }
        }
        if self.light_intensity_range[0] < 0.0 {
            return Err(SceneError::Config("light intensity must be non-negative".into()));
        }
        if !(0.0..=90.0).contains(&self.light_direction_cone_deg) {
            return Err(SceneError::Config("light_direction_cone_deg must be in [0, 90]".into()));
        }
        if self.object_xy_jitter.iter().any(|j| !(j.is_finite() && *j >= 0.0)) {
            return Err(SceneError::Config("object_xy_jitter must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("object {object} (footprint radius {radius:.3} m) cannot fit the table with the configured jitter")]
    DoesNotFit { object: String, radius: f64 },
    #[error("no start pose with the object and background both in view after {0} tries")]
    NotVisible(usize),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("scene descriptor line {line}: {message}")]
    Descriptor { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneInstance {
    pub seed: u64,
    pub object: String,
    pub object_pose: RigidTransform,
    pub wall_texture: String,
    pub floor_texture: String,
    pub table_texture: String,
    pub light_intensity: f64,
    /// Direction the light travels (points downward).
    pub light_direction: Vec3,
}

/// Uniform draw from `[lo, hi)`, or `lo` when the interval is empty.
fn uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

fn pick<'a>(rng: &mut impl Rng, pool: &'a [String]) -> &'a str {
    &pool[rng.random_range(0..pool.len())]
}

/// Draws a scene; a pure function of its arguments.
pub fn sample_scene(
    ws: &WorkspaceConfig,
    spec: &RandomizationSpec,
    object: &ObjectSpec,
    seed: u64,
) -> Result<SceneInstance, SceneError> {
    let radius = object.mesh.footprint_radius();
    let [jx, jy] = spec.object_xy_jitter;
    if jx + radius > ws.table_extents[0] / 2.0 || jy + radius > ws.table_extents[1] / 2.0 {
        return Err(SceneError::DoesNotFit {
            object: object.name.clone(),
            radius,
        });
    }

    let mut rng = stream_rng(seed, SCENE_STREAM);
    let yaw = uniform(&mut rng, spec.object_yaw_range_deg[0], spec.object_yaw_range_deg[1]).to_radians();
    let x = uniform(&mut rng, -jx, jx);
    let y = uniform(&mut rng, -jy, jy);
    let wall_texture = pick(&mut rng, &spec.wall_textures).to_string();
    let floor_texture = pick(&mut rng, &spec.floor_textures).to_string();
    let table_texture = pick(&mut rng, &spec.table_textures).to_string();
    let [i_lo, i_hi] = spec.light_intensity_range;
    let light_intensity = uniform(&mut rng, i_lo, i_hi);
    // uniform over the spherical cap around -z
    let cos_max = spec.light_direction_cone_deg.to_radians().cos();
    let cos_theta = uniform(&mut rng, cos_max, 1.0);
    let phi = uniform(&mut rng, 0.0, std::f64::consts::TAU);
    let sin_theta = (1.0 - cos_theta * cos_theta).max(0.0).sqrt();
    let light_direction = Vec3::new(sin_theta * phi.cos(), sin_theta * phi.sin(), -cos_theta);

    Ok(SceneInstance {
        seed,
        object: object.name.clone(),
        object_pose: RigidTransform::new(
            UnitQuaternion::from_axis_angle(&Vec3::z_axis(), yaw),
            Vec3::new(x, y, ws.table_top_height + object.rest_offset),
        ),
        wall_texture,
        floor_texture,
        table_texture,
        light_intensity,
        light_direction,
    })
}

/// Target box center in the world frame.
pub fn target_point(scene: &SceneInstance, target: &PartSpec) -> Vec3 {
    scene.object_pose.transform_point(&target.bbox.center())
}

/// Samples the palm start pose on the start plane, looking at the target box
/// center, until the camera view shows both object and background.
pub fn sample_start_pose(
    ws: &WorkspaceConfig,
    scene: &SceneInstance,
    object: &ObjectSpec,
    target: &PartSpec,
    seed: u64,
) -> Result<RigidTransform, SceneError> {
    let mut rng = stream_rng(seed, START_POSE_STREAM);
    let aim = target_point(scene, target);
    let plane_y = ws.start_plane_y();
    let [w, h] = ws.start_plane_window;
    let z_mid = ws.table_top_height + ws.start_window_height;
    let stage = Stage::new(ws, scene, object);
    let intr = ws.intrinsics();
    let offset = ws.camera_offset();
    for _ in 0..START_POSE_RETRIES {
        let x = uniform(&mut rng, -w / 2.0, w / 2.0);
        let z = uniform(&mut rng, z_mid - h / 2.0, z_mid + h / 2.0);
        let eye = Vec3::new(x, plane_y, z);
        let palm = RigidTransform::new(look_at(&eye, &aim, &Vec3::z())?, eye);
        if view_has_object_and_background(&stage, &palm.compose(&offset), &intr) {
            return Ok(palm);
        }
    }
    Err(SceneError::NotVisible(START_POSE_RETRIES))
}

fn fmt_floats(values: &[f64]) -> String {
    values.iter().map(|v| g9(*v)).collect::<Vec<_>>().join(" ")
}

impl SceneInstance {
    /// `key=value` lines; poses as `px py pz qw qx qy qz`.
    pub fn to_descriptor(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "seed={}", self.seed);
        let _ = writeln!(out, "object={}", self.object);
        let _ = writeln!(out, "object_pose={}", fmt_floats(&self.object_pose.to_array7()));
        let _ = writeln!(out, "wall_texture={}", self.wall_texture);
        let _ = writeln!(out, "floor_texture={}", self.floor_texture);
        let _ = writeln!(out, "table_texture={}", self.table_texture);
        let _ = writeln!(out, "light_intensity={}", g9(self.light_intensity));
        let d = &self.light_direction;
        let _ = writeln!(out, "light_direction={}", fmt_floats(&[d.x, d.y, d.z]));
        out
    }

    /// Reads the keys written by [`to_descriptor`](Self::to_descriptor) out
    /// of a descriptor that may carry additional keys.
    pub fn from_descriptor(desc: &Descriptor) -> Result<SceneInstance, SceneError> {
        let light: [f64; 3] = desc.floats("light_direction")?;
        let light_direction = Vec3::from(light);
        if (light_direction.norm() - 1.0).abs() > 1e-6 {
            return Err(desc.error("light_direction", "not a unit vector".into()));
        }
        Ok(SceneInstance {
            seed: desc.value("seed")?,
            object: desc.get("object")?.to_string(),
            object_pose: desc.pose("object_pose")?,
            wall_texture: desc.get("wall_texture")?.to_string(),
            floor_texture: desc.get("floor_texture")?.to_string(),
            table_texture: desc.get("table_texture")?.to_string(),
            light_intensity: desc.value("light_intensity")?,
            light_direction,
        })
    }
}

/// Parsed `key=value` file that remembers line numbers for error messages.
#[derive(Debug, Clone, Default)]
pub struct Descriptor {
    entries: Vec<(String, String, usize)>,
}

impl Descriptor {
    pub fn parse(text: &str) -> Result<Descriptor, SceneError> {
        let mut entries: Vec<(String, String, usize)> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or(SceneError::Descriptor {
                line: line_no,
                message: "expected key=value".into(),
            })?;
            if entries.iter().any(|(key, _, _)| key == k) {
                return Err(SceneError::Descriptor {
                    line: line_no,
                    message: format!("duplicate key {k}"),
                });
            }
            entries.push((k.trim().to_string(), v.trim().to_string(), line_no));
        }
        Ok(Descriptor { entries })
    }

    fn entry(&self, key: &str) -> Option<&(String, String, usize)> {
        self.entries.iter().find(|(k, _, _)| k == key)
    }

    pub fn error(&self, key: &str, message: String) -> SceneError {
        SceneError::Descriptor {
            line: self.entry(key).map_or(0, |e| e.2),
            message: format!("{key}: {message}"),
        }
    }

    pub fn get(&self, key: &str) -> Result<&str, SceneError> {
        self.entry(key).map(|e| e.1.as_str()).ok_or_else(|| SceneError::Descriptor {
            line: 0,
            message: format!("missing key {key}"),
        })
    }

    pub fn value<T: std::str::FromStr>(&self, key: &str) -> Result<T, SceneError> {
        let raw = self.get(key)?;
        raw.parse().map_err(|_| self.error(key, format!("cannot parse {raw:?}")))
    }

    pub fn floats<const N: usize>(&self, key: &str) -> Result<[f64; N], SceneError> {
        let raw = self.get(key)?;
        let values: Vec<f64> = raw
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|_| self.error(key, format!("cannot parse {raw:?}")))?;
        values
            .try_into()
            .map_err(|v: Vec<f64>| self.error(key, format!("expected {N} numbers, got {}", v.len())))
    }

    pub fn pose(&self, key: &str) -> Result<RigidTransform, SceneError> {
        let v: [f64; 7] = self.floats(key)?;
        RigidTransform::from_array7(v, 1e-6).map_err(|e| self.error(key, e.to_string()))
    }
}
