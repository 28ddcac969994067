use std::fs;
use std::path::Path;

use preshape_forge::config::Config;
use preshape_forge::dataset::{generate_dataset, generate_sequences, Dataset, DatasetError};
use preshape_forge::geometry::{TriangleMesh, Vec3};
use preshape_forge::taxonomy::{load_taxonomy, GraspTaxonomy, PreShape};

const MAP: &str = "[map]
AdductedThumb -> Lateral
LargeDiameter -> Power
SmallDiameter -> Power
MediumWrap -> Power
Sphere4Fingers -> Power
PowerSphere -> Power
Prismatic4Fingers -> Pinch
Tripod -> Pinch3Digit
Prismatic2Fingers -> Pinch3Digit
";

/// One cube object with a single part box described by `part_line`.
fn block_taxonomy(dir: &Path, part_line: &str) -> GraspTaxonomy {
    fs::write(
        dir.join("block.obj"),
        TriangleMesh::cuboid(Vec3::new(0.0, 0.0, 0.03), Vec3::repeat(0.03)).to_obj(),
    )
    .unwrap();
    let text = format!("total_parts 1\n[object block]\nmesh block.obj\n{part_line}\n{MAP}");
    fs::write(dir.join("taxonomy.txt"), text).unwrap();
    load_taxonomy(&dir.join("taxonomy.txt")).unwrap()
}

fn small_config(per_pair: u32) -> Config {
    let mut cfg = Config::bundled();
    cfg.generation.per_pair = per_pair;
    cfg
}

fn read_tree(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(root).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn single_part_taxonomy_gives_one_sequence() {
    let tmp = tempfile::tempdir().unwrap();
    let tax = block_taxonomy(tmp.path(), "part top Tripod 0 0 0.05 0.04 0.04 0.025 1 0 0 0 face=4");
    let out = tmp.path().join("ds");
    let report = generate_dataset(&small_config(1), &tax, "taxonomy.txt", &out, 1).unwrap();
    assert_eq!(report.total_sequences(), 1);
    let ds = Dataset::open(&out).unwrap();
    assert_eq!(ds.manifest.rows.len(), 1);
    assert_eq!(ds.manifest.rows[0].seq_id, "block_top_000");
    assert_eq!(ds.manifest.rows[0].pre_shape, PreShape::Pinch3Digit);
    assert!(ds.validate(&tax).is_empty());
}

#[test]
fn buried_part_is_reported_unreachable() {
    let tmp = tempfile::tempdir().unwrap();
    let tax = block_taxonomy(tmp.path(), "part core Tripod 0 0 0.03 0.01 0.01 0.01 1 0 0 0 face=4");
    let mut cfg = small_config(2);
    cfg.generation.max_attempts = 15;
    match generate_sequences(&cfg, &tax, 1) {
        Err(DatasetError::Unreachable(failures)) => {
            assert_eq!(failures.len(), 1);
            assert_eq!(failures[0].part_id, "core");
            assert_eq!(failures[0].attempts, 15);
            assert_eq!(failures[0].rejections.mesh_first, 15);
            let msg = DatasetError::Unreachable(failures).to_string();
            assert!(msg.contains("block/core"), "{msg}");
        }
        other => panic!("expected unreachable, got {other:?}"),
    }
}

#[test]
fn round_trip_reproduces_written_fields() {
    let tmp = tempfile::tempdir().unwrap();
    let tax = GraspTaxonomy::bundled();
    let cfg = small_config(1);
    let (mut records, _) = generate_sequences(&cfg, &tax, 1).unwrap();
    records.truncate(5);
    let out = tmp.path().join("ds");
    preshape_forge::dataset::write_dataset(&out, &cfg, &tax, "bundled", &mut records, 1).unwrap();
    let ds = Dataset::open(&out).unwrap();
    assert_eq!(ds.meta.config, cfg);
    assert_eq!(ds.meta.taxonomy, "bundled");
    assert_eq!(ds.manifest.rows.len(), 5);
    for (orig, loaded) in records.iter().zip(ds.sequences()) {
        let loaded = loaded.unwrap();
        assert_eq!(loaded.manifest_row(), orig.manifest_row());
        assert_eq!((loaded.grasp_type, loaded.pre_shape, loaded.seed), (orig.grasp_type, orig.pre_shape, orig.seed));
        assert_eq!(loaded.frames.len(), orig.frames.len());
        for (a, b) in loaded.frames.iter().zip(&orig.frames) {
            assert_eq!(a.label, b.label);
            assert!((a.t_s - b.t_s).abs() < 1e-12);
            assert!((a.pose.translation - b.pose.translation).norm() < 1e-8);
            assert!(a.pose.rotation.angle_to(&b.pose.rotation) < 1e-8);
        }
        assert_eq!(loaded.scene.to_descriptor(), orig.scene.to_descriptor());
        assert!((loaded.approach.t_contact - orig.approach.t_contact).abs() < 1e-8);
        assert!(loaded.approach.end_orientation.angle_to(&orig.approach.end_orientation) < 1e-8);
    }
    // rewriting what was loaded keeps the manifest and metadata bytes
    let mut reloaded: Vec<_> = ds.sequences().collect::<Result<_, _>>().unwrap();
    let again = tmp.path().join("again");
    preshape_forge::dataset::write_dataset(&again, &cfg, &tax, "bundled", &mut reloaded, 1).unwrap();
    for f in ["manifest.csv", "dataset.toml"] {
        assert_eq!(fs::read(out.join(f)).unwrap(), fs::read(again.join(f)).unwrap(), "{f}");
    }
    assert_eq!(read_tree(&out).len(), read_tree(&again).len());
}

#[test]
fn same_seed_same_bytes_any_worker_count() {
    let tmp = tempfile::tempdir().unwrap();
    let tax = GraspTaxonomy::bundled();
    let cfg = small_config(2);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    generate_dataset(&cfg, &tax, "bundled", &a, 1).unwrap();
    generate_dataset(&cfg, &tax, "bundled", &b, 3).unwrap();
    let (ta, tb) = (read_tree(&a), read_tree(&b));
    assert_eq!(ta.len(), 2 + 2 * 31 * 2);
    assert_eq!(ta, tb);
    let mut other = cfg.clone();
    other.generation.master_seed += 1;
    let c = tmp.path().join("c");
    generate_dataset(&other, &tax, "bundled", &c, 1).unwrap();
    assert_ne!(fs::read(a.join("manifest.csv")).unwrap(), fs::read(c.join("manifest.csv")).unwrap());
}

#[test]
fn refuses_non_empty_output() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("junk"), "x").unwrap();
    let err = generate_dataset(&small_config(1), &GraspTaxonomy::bundled(), "bundled", tmp.path(), 1).unwrap_err();
    assert!(matches!(err, DatasetError::Invalid(_)));
}

fn fresh_dataset(per_pair: u32) -> (tempfile::TempDir, std::path::PathBuf) {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("ds");
    generate_dataset(&small_config(per_pair), &GraspTaxonomy::bundled(), "bundled", &out, 1).unwrap();
    (tmp, out)
}

#[test]
fn validation_names_broken_sequences() {
    let tax = GraspTaxonomy::bundled();
    let (_tmp, out) = fresh_dataset(1);
    let ds = Dataset::open(&out).unwrap();
    assert!(ds.validate(&tax).is_empty());

    // label suffix rule: a NoGrasp frame in the middle
    let victim = &ds.manifest.rows[4];
    let poses = out.join(&victim.relative_path).join("poses.csv");
    let text = fs::read_to_string(&poses).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    let label = victim.pre_shape.name();
    lines[2] = lines[2].replace(label, "NoGrasp");
    fs::write(&poses, lines.join("\n") + "\n").unwrap();
    let v = ds.validate(&tax);
    assert_eq!(v.len(), 1, "{v:?}");
    assert_eq!(v[0].seq_id.as_deref(), Some(victim.seq_id.as_str()));
    assert!(v[0].message.contains("after NoGrasp"), "{}", v[0]);

    // a NoGrasp suffix is fine
    let n = lines.len();
    lines[2] = lines[2].replace("NoGrasp", label);
    lines[n - 1] = lines[n - 1].replace(label, "NoGrasp");
    fs::write(&poses, lines.join("\n") + "\n").unwrap();
    assert!(ds.validate(&tax).is_empty());

    // truncated file: parse error with the line number
    fs::write(&poses, text.lines().take(4).collect::<Vec<_>>().join("\n") + "\n7,0.35,1\n").unwrap();
    let v = ds.validate(&tax);
    assert_eq!(v.len(), 1);
    assert!(v[0].message.contains("poses.csv:5: expected 10 fields, found 3"), "{}", v[0]);

    // missing directory
    let gone = &ds.manifest.rows[0];
    fs::remove_dir_all(out.join(&gone.relative_path)).unwrap();
    let v = ds.validate(&tax);
    assert!(v.iter().any(|x| x.seq_id.as_deref() == Some(gone.seq_id.as_str()) && x.message.contains("missing directory")));
    match ds.load_sequence(gone) {
        Err(DatasetError::Sequence { seq_id, .. }) => assert_eq!(seq_id, gone.seq_id),
        other => panic!("{other:?}"),
    }
}

#[test]
fn manifest_inconsistencies_are_violations() {
    let tax = GraspTaxonomy::bundled();
    let (_tmp, out) = fresh_dataset(1);
    let path = out.join("manifest.csv");
    let text = fs::read_to_string(&path).unwrap();
    // hammer handle is SmallDiameter/Power; claim Pinch instead
    let edited = text.replace("hammer,handle,SmallDiameter,Power", "hammer,handle,SmallDiameter,Pinch");
    assert_ne!(edited, text);
    fs::write(&path, edited).unwrap();
    let v = Dataset::open(&out).unwrap().validate(&tax);
    assert!(v.iter().any(|x| x.message.contains("pre-shape Pinch")), "{v:?}");
    assert!(v.iter().any(|x| x.message.contains("labeled Power")), "{v:?}");
}

#[test]
fn version_mismatch_is_rejected() {
    let (_tmp, out) = fresh_dataset(1);
    let meta = out.join("dataset.toml");
    let text = fs::read_to_string(&meta).unwrap().replace("format_version = 1", "format_version = 9");
    fs::write(&meta, text).unwrap();
    assert!(matches!(Dataset::open(&out), Err(DatasetError::Version { found: 9, expected: 1 })));
}

#[test]
fn nograsp_tail_relabels_suffix() {
    let tax = GraspTaxonomy::bundled();
    let mut cfg = small_config(1);
    cfg.trajectory.no_grasp_tail_s = 0.2;
    let (records, _) = generate_sequences(&cfg, &tax, 1).unwrap();
    for r in &records {
        let tail = r.frames.iter().rev().take_while(|f| f.label == PreShape::NoGrasp).count();
        assert_eq!(tail, 4.min(r.frames.len() - 1));
        assert!(r.frames.iter().take(r.frames.len() - tail).all(|f| f.label == r.pre_shape));
    }
}

#[test]
fn rendered_frames_are_written() {
    let tmp = tempfile::tempdir().unwrap();
    let tax = block_taxonomy(tmp.path(), "part top Tripod 0 0 0.05 0.04 0.04 0.025 1 0 0 0 face=4");
    let mut cfg = small_config(1);
    cfg.generation.render = true;
    cfg.generation.label_parts = true;
    cfg.workspace.image_size = [32, 24];
    let out = tmp.path().join("ds");
    generate_dataset(&cfg, &tax, "taxonomy.txt", &out, 1).unwrap();
    let ds = Dataset::open(&out).unwrap();
    let rec = ds.load_sequence(&ds.manifest.rows[0]).unwrap();
    let frames = rec.render_dir.expect("frames directory");
    for k in 0..rec.frames.len() {
        let rgb = fs::read(frames.join(format!("frame_{k:05}.rgb.ppm"))).unwrap();
        assert!(rgb.starts_with(b"P6\n32 24\n255\n"));
        assert_eq!(rgb.len(), 13 + 32 * 24 * 3);
        let depth = fs::read(frames.join(format!("frame_{k:05}.depth.pgm"))).unwrap();
        assert_eq!(depth.len(), "P5\n32 24\n65535\n".len() + 32 * 24 * 2);
        let label = fs::read(frames.join(format!("frame_{k:05}.label.pgm"))).unwrap();
        assert!(label.starts_with(b"P5\n32 24\n255\n"));
    }
    assert!(!frames.join(format!("frame_{:05}.rgb.ppm", rec.frames.len())).exists());
}
