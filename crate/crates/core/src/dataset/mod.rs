//! Dataset generation, on-disk format, loading and validation, and the
//! per-epoch class-balancing sampler.
//!
//! Layout under the dataset root:
//!
//! ```text
//! dataset.toml            format version, taxonomy reference, resolved config
//! manifest.csv            one row per sequence
//! <seq_id>/poses.csv      frame,t_s,px,py,pz,qw,qx,qy,qz,label
//! <seq_id>/scene.txt      key=value scene descriptor plus approach keys
//! <seq_id>/frames/        frame_%05d.{rgb.ppm,depth.pgm,label.pgm} (optional)
//! ```

mod balance;
mod format;
mod generate;

pub use balance::{balance_epoch, EpochSample};
pub use format::{
    read_manifest, read_poses, read_scene_file, write_dataset, write_manifest, write_poses, write_scene_file, Dataset,
    DatasetMeta, Violation, MANIFEST_HEADER, POSES_HEADER,
};
pub use generate::{generate_dataset, generate_sequences, GenerationReport, PairCoverage, PairFailure};

use std::path::PathBuf;

use nalgebra::UnitQuaternion;
use thiserror::Error;

use crate::geometry::{RigidTransform, Vec3};
use crate::scene::SceneInstance;
use crate::taxonomy::{GraspType, PreShape};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("unsupported dataset format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("sequence {seq_id}: {message}")]
    Sequence { seq_id: String, message: String },
    #[error("{} pair(s) unreachable: {}", .0.len(), .0.iter().map(|f| f.to_string()).collect::<Vec<_>>().join("; "))]
    Unreachable(Vec<PairFailure>),
    #[error("invalid request: {0}")]
    Invalid(String),
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error(transparent)]
    Taxonomy(#[from] crate::taxonomy::TaxonomyError),
}

impl DatasetError {
    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> DatasetError {
        let path = path.into();
        move |source| DatasetError::Io { path, source }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameRecord {
    pub t_s: f64,
    /// Palm pose; the camera sits at `pose ∘ camera_offset`.
    pub pose: RigidTransform,
    pub label: PreShape,
}

/// Approach geometry kept alongside the scene so that the final orientation
/// can be checked even though truncated frames never reach it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproachRecord {
    pub start_pose: RigidTransform,
    pub end_point: Vec3,
    pub end_orientation: UnitQuaternion<f64>,
    /// Segment parameter at which the target box is entered.
    pub t_contact: f64,
    /// Planned movement duration.
    pub duration_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceRecord {
    pub seq_id: String,
    pub object: String,
    pub part_id: String,
    pub grasp_type: GraspType,
    pub pre_shape: PreShape,
    /// Attempt seed the scene and start pose were drawn from.
    pub seed: u64,
    pub fps: f64,
    pub frames: Vec<FrameRecord>,
    pub scene: SceneInstance,
    pub approach: ApproachRecord,
    /// Directory holding rendered frames, when present.
    pub render_dir: Option<PathBuf>,
}

impl SequenceRecord {
    pub fn manifest_row(&self) -> ManifestRow {
        ManifestRow {
            seq_id: self.seq_id.clone(),
            object: self.object.clone(),
            part_id: self.part_id.clone(),
            grasp_type: self.grasp_type,
            pre_shape: self.pre_shape,
            seed: self.seed,
            num_frames: self.frames.len(),
            duration_s: self.approach.duration_s,
            fps: self.fps,
            relative_path: self.seq_id.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    pub seq_id: String,
    pub object: String,
    pub part_id: String,
    pub grasp_type: GraspType,
    pub pre_shape: PreShape,
    pub seed: u64,
    pub num_frames: usize,
    /// Planned movement duration (the recorded frames stop at contact).
    pub duration_s: f64,
    pub fps: f64,
    pub relative_path: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetManifest {
    pub rows: Vec<ManifestRow>,
}

impl DatasetManifest {
    pub fn row(&self, seq_id: &str) -> Option<&ManifestRow> {
        self.rows.iter().find(|r| r.seq_id == seq_id)
    }

    pub fn class_counts(&self) -> [usize; 5] {
        let mut counts = [0; 5];
        for r in &self.rows {
            counts[r.pre_shape.index()] += 1;
        }
        counts
    }
}

/// `<object>_<part>_<index:03>`.
pub fn seq_id(object: &str, part_id: &str, index: u32) -> String {
    format!("{object}_{part_id}_{index:03}")
}
