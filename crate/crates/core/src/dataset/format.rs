use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::generate::thread_pool;
use super::{ApproachRecord, DatasetError, DatasetManifest, FrameRecord, ManifestRow, SequenceRecord, FORMAT_VERSION};
use crate::config::Config;
use crate::geometry::{quat_from_wxyz, quat_to_wxyz, RigidTransform, Vec3};
use crate::render::{render_frame, write_frame_files, Stage};
use crate::scene::{Descriptor, SceneError, SceneInstance};
use crate::taxonomy::{GraspTaxonomy, PreShape};
use crate::textfmt::g9;

pub const MANIFEST_HEADER: [&str; 10] = [
    "seq_id",
    "object",
    "part_id",
    "grasp_type",
    "pre_shape",
    "seed",
    "num_frames",
    "duration_s",
    "fps",
    "relative_path",
];

pub const POSES_HEADER: [&str; 10] = ["frame", "t_s", "px", "py", "pz", "qw", "qx", "qy", "qz", "label"];

const META_FILE: &str = "dataset.toml";
const MANIFEST_FILE: &str = "manifest.csv";
const POSES_FILE: &str = "poses.csv";
const SCENE_FILE: &str = "scene.txt";
const FRAMES_DIR: &str = "frames";

/// Contents of `dataset.toml`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetMeta {
    pub format_version: u32,
    /// `"bundled"` or the taxonomy path used for generation.
    pub taxonomy: String,
    pub config: Config,
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>, DatasetError> {
    let file = std::fs::File::create(path).map_err(DatasetError::io(path))?;
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(file))
}

fn csv_error(path: &Path, e: csv::Error) -> DatasetError {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(source) => DatasetError::Io {
            path: path.to_path_buf(),
            source,
        },
        kind => DatasetError::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("{kind:?}"),
        },
    }
}

/// Rows of a CSV file with its header checked against `header`; yields
/// (1-based line, record).
fn read_csv(path: &Path, header: &[&str]) -> Result<Vec<(usize, csv::StringRecord)>, DatasetError> {
    let file = std::fs::File::open(path).map_err(DatasetError::io(path))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(file);
    let found = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(DatasetError::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("expected header {:?}, found {:?}", header.join(","), found.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != header.len() {
            return Err(DatasetError::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("expected {} fields, found {}", header.len(), rec.len()),
            });
        }
        out.push((line, rec));
    }
    Ok(out)
}

fn field<T: std::str::FromStr>(path: &Path, line: usize, rec: &csv::StringRecord, i: usize, name: &str) -> Result<T, DatasetError> {
    rec[i].parse().map_err(|_| DatasetError::Parse {
        path: path.to_path_buf(),
        line,
        message: format!("cannot parse {name} from {:?}", &rec[i]),
    })
}

pub fn write_manifest(path: &Path, manifest: &DatasetManifest) -> Result<(), DatasetError> {
    let mut w = csv_writer(path)?;
    let err = |e: csv::Error| csv_error(path, e);
    w.write_record(MANIFEST_HEADER).map_err(err)?;
    for r in &manifest.rows {
        w.write_record([
            r.seq_id.clone(),
            r.object.clone(),
            r.part_id.clone(),
            r.grasp_type.name().to_string(),
            r.pre_shape.name().to_string(),
            r.seed.to_string(),
            r.num_frames.to_string(),
            g9(r.duration_s),
            g9(r.fps),
            r.relative_path.clone(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(DatasetError::io(path))
}

pub fn read_manifest(path: &Path) -> Result<DatasetManifest, DatasetError> {
    let rows = read_csv(path, &MANIFEST_HEADER)?
        .into_iter()
        .map(|(line, rec)| {
            Ok(ManifestRow {
                seq_id: rec[0].to_string(),
                object: rec[1].to_string(),
                part_id: rec[2].to_string(),
                grasp_type: field(path, line, &rec, 3, "grasp_type")?,
                pre_shape: field(path, line, &rec, 4, "pre_shape")?,
                seed: field(path, line, &rec, 5, "seed")?,
                num_frames: field(path, line, &rec, 6, "num_frames")?,
                duration_s: field(path, line, &rec, 7, "duration_s")?,
                fps: field(path, line, &rec, 8, "fps")?,
                relative_path: rec[9].to_string(),
            })
        })
        .collect::<Result<_, DatasetError>>()?;
    Ok(DatasetManifest { rows })
}

pub fn write_poses(path: &Path, frames: &[FrameRecord]) -> Result<(), DatasetError> {
    let mut w = csv_writer(path)?;
    let err = |e: csv::Error| csv_error(path, e);
    w.write_record(POSES_HEADER).map_err(err)?;
    for (k, f) in frames.iter().enumerate() {
        let mut rec = vec![k.to_string(), g9(f.t_s)];
        rec.extend(f.pose.to_array7().iter().map(|v| g9(*v)));
        rec.push(f.label.name().to_string());
        w.write_record(&rec).map_err(err)?;
    }
    w.flush().map_err(DatasetError::io(path))
}

/// Frames as written, with their frame indices (not checked for
/// contiguity here; see [`Dataset::validate`]).
pub fn read_poses(path: &Path) -> Result<Vec<(usize, FrameRecord)>, DatasetError> {
    read_csv(path, &POSES_HEADER)?
        .into_iter()
        .map(|(line, rec)| {
            let index: usize = field(path, line, &rec, 0, "frame")?;
            let t_s: f64 = field(path, line, &rec, 1, "t_s")?;
            let mut v = [0.0; 7];
            for (i, slot) in v.iter_mut().enumerate() {
                *slot = field(path, line, &rec, 2 + i, POSES_HEADER[2 + i])?;
            }
            let pose = RigidTransform::from_array7(v, 1e-6).map_err(|e| DatasetError::Parse {
                path: path.to_path_buf(),
                line,
                message: e.to_string(),
            })?;
            if v[3] < 0.0 {
                return Err(DatasetError::Parse {
                    path: path.to_path_buf(),
                    line,
                    message: "quaternion not canonical (qw < 0)".into(),
                });
            }
            let label: PreShape = field(path, line, &rec, 9, "label")?;
            Ok((index, FrameRecord { t_s, pose, label }))
        })
        .collect()
}

fn floats(values: &[f64]) -> String {
    values.iter().map(|v| g9(*v)).collect::<Vec<_>>().join(" ")
}

pub fn write_scene_file(path: &Path, record: &SequenceRecord) -> Result<(), DatasetError> {
    let a = &record.approach;
    let mut text = record.scene.to_descriptor();
    text += &format!("target_part={}\n", record.part_id);
    text += &format!("start_pose={}\n", floats(&a.start_pose.to_array7()));
    text += &format!("end_point={}\n", floats(&[a.end_point.x, a.end_point.y, a.end_point.z]));
    text += &format!("end_orientation={}\n", floats(&quat_to_wxyz(&a.end_orientation)));
    text += &format!("t_contact={}\n", g9(a.t_contact));
    text += &format!("duration_s={}\n", g9(a.duration_s));
    std::fs::write(path, text).map_err(DatasetError::io(path))
}

/// Scene, target part id and approach geometry from a `scene.txt`.
pub fn read_scene_file(path: &Path) -> Result<(SceneInstance, String, ApproachRecord), DatasetError> {
    let text = std::fs::read_to_string(path).map_err(DatasetError::io(path))?;
    let to_parse = |e: SceneError| match e {
        SceneError::Descriptor { line, message } => DatasetError::Parse {
            path: path.to_path_buf(),
            line,
            message,
        },
        other => DatasetError::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: other.to_string(),
        },
    };
    let desc = Descriptor::parse(&text).map_err(to_parse)?;
    let scene = SceneInstance::from_descriptor(&desc).map_err(to_parse)?;
    let part = desc.get("target_part").map_err(to_parse)?.to_string();
    let end: [f64; 3] = desc.floats("end_point").map_err(to_parse)?;
    let q: [f64; 4] = desc.floats("end_orientation").map_err(to_parse)?;
    let end_orientation = quat_from_wxyz(q, 1e-6).map_err(|e| to_parse(desc.error("end_orientation", e.to_string())))?;
    let approach = ApproachRecord {
        start_pose: desc.pose("start_pose").map_err(to_parse)?,
        end_point: Vec3::from(end),
        end_orientation,
        t_contact: desc.value("t_contact").map_err(to_parse)?,
        duration_s: desc.value("duration_s").map_err(to_parse)?,
    };
    Ok((scene, part, approach))
}

fn write_meta(path: &Path, meta: &DatasetMeta) -> Result<(), DatasetError> {
    let text = toml::to_string(meta).map_err(|e| DatasetError::Invalid(format!("cannot serialize metadata: {e}")))?;
    std::fs::write(path, text).map_err(DatasetError::io(path))
}

/// Writes metadata, manifest and per-sequence files. `out` must be empty or
/// absent. With `cfg.generation.render`, frames are rendered as well and
/// each record's `render_dir` is set.
pub fn write_dataset(
    out: &Path,
    cfg: &Config,
    taxonomy: &GraspTaxonomy,
    taxonomy_ref: &str,
    records: &mut [SequenceRecord],
    workers: usize,
) -> Result<(), DatasetError> {
    if out.exists() {
        let mut entries = std::fs::read_dir(out).map_err(DatasetError::io(out))?;
        if entries.next().is_some() {
            return Err(DatasetError::Invalid(format!("output directory {} is not empty", out.display())));
        }
    }
    std::fs::create_dir_all(out).map_err(DatasetError::io(out))?;
    let mut seen = HashSet::new();
    if let Some(dup) = records.iter().find(|r| !seen.insert(r.seq_id.as_str())) {
        return Err(DatasetError::Invalid(format!("duplicate seq_id {}", dup.seq_id)));
    }
    write_meta(
        &out.join(META_FILE),
        &DatasetMeta {
            format_version: FORMAT_VERSION,
            taxonomy: taxonomy_ref.to_string(),
            config: cfg.clone(),
        },
    )?;
    let manifest = DatasetManifest {
        rows: records.iter().map(SequenceRecord::manifest_row).collect(),
    };
    write_manifest(&out.join(MANIFEST_FILE), &manifest)?;
    thread_pool(workers)?.install(|| {
        records.par_iter_mut().try_for_each(|r| write_sequence(out, cfg, taxonomy, r))
    })
}

fn write_sequence(out: &Path, cfg: &Config, taxonomy: &GraspTaxonomy, r: &mut SequenceRecord) -> Result<(), DatasetError> {
    let dir = out.join(&r.seq_id);
    std::fs::create_dir_all(&dir).map_err(DatasetError::io(&dir))?;
    write_poses(&dir.join(POSES_FILE), &r.frames)?;
    write_scene_file(&dir.join(SCENE_FILE), r)?;
    if cfg.generation.render {
        let frames_dir = dir.join(FRAMES_DIR);
        std::fs::create_dir_all(&frames_dir).map_err(DatasetError::io(&frames_dir))?;
        render_sequence(&frames_dir, cfg, taxonomy, r)?;
        r.render_dir = Some(frames_dir);
    }
    Ok(())
}

/// Renders every frame of `record` into `dir`.
pub fn render_sequence(dir: &Path, cfg: &Config, taxonomy: &GraspTaxonomy, record: &SequenceRecord) -> Result<(), DatasetError> {
    let object = taxonomy.object(&record.object)?;
    let stage = Stage::new(&cfg.workspace, &record.scene, object);
    let intr = cfg.workspace.intrinsics();
    let offset = cfg.workspace.camera_offset();
    for (k, f) in record.frames.iter().enumerate() {
        let frame = render_frame(&stage, &f.pose.compose(&offset), &intr, cfg.generation.label_parts);
        write_frame_files(dir, k, &frame).map_err(DatasetError::io(dir))?;
    }
    Ok(())
}

/// One broken invariant, attributed to a sequence when possible.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub seq_id: Option<String>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.seq_id {
            Some(id) => write!(f, "{id}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

/// An opened dataset; sequences are read on demand.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub root: PathBuf,
    pub meta: DatasetMeta,
    pub manifest: DatasetManifest,
}

impl Dataset {
    pub fn open(root: &Path) -> Result<Dataset, DatasetError> {
        let meta_path = root.join(META_FILE);
        let text = std::fs::read_to_string(&meta_path).map_err(DatasetError::io(&meta_path))?;
        let parse_err = |e: toml::de::Error| DatasetError::Parse {
            path: meta_path.clone(),
            line: e.span().map_or(0, |s| text[..s.start].lines().count().max(1)),
            message: e.message().to_string(),
        };
        let table: toml::Table = toml::from_str(&text).map_err(parse_err)?;
        let found = table.get("format_version").and_then(toml::Value::as_integer).unwrap_or(-1);
        if found != i64::from(FORMAT_VERSION) {
            return Err(DatasetError::Version {
                found: u32::try_from(found).unwrap_or(0),
                expected: FORMAT_VERSION,
            });
        }
        let meta: DatasetMeta = toml::from_str(&text).map_err(parse_err)?;
        let manifest = read_manifest(&root.join(MANIFEST_FILE))?;
        Ok(Dataset {
            root: root.to_path_buf(),
            meta,
            manifest,
        })
    }

    pub fn sequence_dir(&self, row: &ManifestRow) -> PathBuf {
        self.root.join(&row.relative_path)
    }

    pub fn load_sequence(&self, row: &ManifestRow) -> Result<SequenceRecord, DatasetError> {
        let dir = self.sequence_dir(row);
        if !dir.is_dir() {
            return Err(DatasetError::Sequence {
                seq_id: row.seq_id.clone(),
                message: format!("missing directory {}", dir.display()),
            });
        }
        let frames = read_poses(&dir.join(POSES_FILE))?.into_iter().map(|(_, f)| f).collect();
        let (scene, part_id, approach) = read_scene_file(&dir.join(SCENE_FILE))?;
        if part_id != row.part_id {
            return Err(DatasetError::Sequence {
                seq_id: row.seq_id.clone(),
                message: format!("scene.txt targets part {part_id}, manifest says {}", row.part_id),
            });
        }
        let frames_dir = dir.join(FRAMES_DIR);
        Ok(SequenceRecord {
            seq_id: row.seq_id.clone(),
            object: row.object.clone(),
            part_id,
            grasp_type: row.grasp_type,
            pre_shape: row.pre_shape,
            seed: row.seed,
            fps: row.fps,
            frames,
            scene,
            approach,
            render_dir: frames_dir.is_dir().then_some(frames_dir),
        })
    }

    /// Loads every sequence in manifest order.
    pub fn sequences(&self) -> impl Iterator<Item = Result<SequenceRecord, DatasetError>> + '_ {
        self.manifest.rows.iter().map(|r| self.load_sequence(r))
    }

    /// Re-checks every stored invariant; an empty list means the dataset is
    /// clean.
    pub fn validate(&self, taxonomy: &GraspTaxonomy) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut seen = HashSet::new();
        for row in &self.manifest.rows {
            let mut report = |message: String| {
                out.push(Violation {
                    seq_id: Some(row.seq_id.clone()),
                    message,
                })
            };
            if !seen.insert(row.seq_id.as_str()) {
                report("duplicate seq_id".into());
                continue;
            }
            match taxonomy.object(&row.object) {
                Err(_) => report(format!("object {} not in taxonomy", row.object)),
                Ok(obj) => match obj.part(&row.part_id) {
                    None => report(format!("object {} has no part {}", row.object, row.part_id)),
                    Some((_, p)) if p.grasp_type != row.grasp_type => {
                        report(format!("part {} has grasp type {}, manifest says {}", row.part_id, p.grasp_type, row.grasp_type))
                    }
                    Some(_) => {}
                },
            }
            if taxonomy.preshape_of(row.grasp_type) != row.pre_shape {
                report(format!("pre-shape {} does not match grasp type {}", row.pre_shape, row.grasp_type));
            }
            let dir = self.sequence_dir(row);
            if !dir.is_dir() {
                report(format!("missing directory {}", dir.display()));
                continue;
            }
            let frames = match read_poses(&dir.join(POSES_FILE)) {
                Ok(f) => f,
                Err(e) => {
                    report(e.to_string());
                    continue;
                }
            };
            if let Err(e) = read_scene_file(&dir.join(SCENE_FILE)).and_then(|(scene, part, _)| {
                if scene.object != row.object || part != row.part_id {
                    Err(DatasetError::Invalid(format!("scene.txt describes {}/{}", scene.object, part)))
                } else {
                    Ok(())
                }
            }) {
                report(e.to_string());
            }
            if frames.len() != row.num_frames {
                report(format!("manifest lists {} frames, poses.csv has {}", row.num_frames, frames.len()));
            }
            if frames.len() < 2 {
                report(format!("{} frame(s), need at least 2", frames.len()));
            }
            let mut in_tail = false;
            for (k, (index, f)) in frames.iter().enumerate() {
                if *index != k {
                    report(format!("frame index {index} at position {k}"));
                    break;
                }
                if (f.t_s - k as f64 / row.fps).abs() > 1e-6 {
                    report(format!("frame {k} at t={} s, expected {}", f.t_s, k as f64 / row.fps));
                    break;
                }
                if f.label != row.pre_shape && f.label != PreShape::NoGrasp {
                    report(format!("frame {k} labeled {}, sequence is {}", f.label, row.pre_shape));
                    break;
                }
                if f.label == PreShape::NoGrasp {
                    in_tail = true;
                } else if in_tail {
                    report(format!("frame {k} labeled {} after NoGrasp frames", f.label));
                    break;
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let manifest = DatasetManifest {
            rows: vec![ManifestRow {
                seq_id: "mug_body_000".into(),
                object: "mug".into(),
                part_id: "body".into(),
                grasp_type: crate::taxonomy::GraspType::LargeDiameter,
                pre_shape: PreShape::Power,
                seed: u64::MAX,
                num_frames: 31,
                duration_s: 2.5,
                fps: 20.0,
                relative_path: "mug_body_000".into(),
            }],
        };
        write_manifest(&path, &manifest).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(
            text,
            "seq_id,object,part_id,grasp_type,pre_shape,seed,num_frames,duration_s,fps,relative_path\n\
             mug_body_000,mug,body,LargeDiameter,Power,18446744073709551615,31,2.5,20,mug_body_000\n"
        );
        assert_eq!(read_manifest(&path).unwrap(), manifest);
    }

    #[test]
    fn bad_rows_report_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("poses.csv");
        std::fs::write(
            &path,
            "frame,t_s,px,py,pz,qw,qx,qy,qz,label\n0,0,0,0,0,1,0,0,0,Power\n1,0.05,0,0,x,1,0,0,0,Power\n",
        )
        .unwrap();
        match read_poses(&path) {
            Err(DatasetError::Parse { line, message, .. }) => {
                assert_eq!(line, 3);
                assert!(message.contains("pz"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        std::fs::write(&path, "frame,t_s,px,py,pz,qw,qx,qy,qz,label\n0,0,0,0,0,1,0,0,0,Power\n1,0.05,0\n").unwrap();
        assert!(matches!(read_poses(&path), Err(DatasetError::Parse { line: 3, .. })));
        std::fs::write(&path, "frame,t,px\n").unwrap();
        assert!(matches!(read_poses(&path), Err(DatasetError::Parse { line: 1, .. })));
        std::fs::write(&path, "frame,t_s,px,py,pz,qw,qx,qy,qz,label\n0,0,0,0,0,-1,0,0,0,Power\n").unwrap();
        assert!(matches!(read_poses(&path), Err(DatasetError::Parse { line: 2, .. })));
    }
}
