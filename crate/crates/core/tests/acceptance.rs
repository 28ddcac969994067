//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Run with `cargo test -p preshape-forge --test acceptance`.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use common::{dense_first_hit, RawTaxonomy};
use preshape_forge::config::Config;
use preshape_forge::dataset::{generate_dataset, Dataset, SequenceRecord};
use preshape_forge::eval::{majority_vote, oracle_single_grasp, score, GroundTruth};
use preshape_forge::geometry::{HitTarget, Vec3};
use preshape_forge::render::{object_pixel_stats, render_labels, Stage};
use preshape_forge::scene::{sample_scene, sample_start_pose, SceneError};
use preshape_forge::taxonomy::{GraspTaxonomy, PreShape};
use preshape_forge::trajectory::{
    check_acceptance, discrete_jerk_cost, min_jerk_acceleration, min_jerk_s, min_jerk_velocity, plan_trajectory,
    AcceptanceStatus, TimeScaling,
};

const PER_PAIR: u32 = 47;
const EXPECTED_SEQUENCES: usize = 1457;
const EXPECTED_PAIRS: usize = 31;
const MAX_RUNTIME: Duration = Duration::from_secs(600);
const BOUNDARY_TOL: f64 = 1e-9;
const PEAK_VELOCITY: f64 = 1.875;
const PEAK_TOL: f64 = 1e-6;
const JERK_GRID: usize = 1000;
const JERK_PINNED: [(TimeScaling, f64); 3] = [
    (TimeScaling::Linear, 3988011995.999689),
    (TimeScaling::CubicSmoothstep, 35963.91992140444),
    (TimeScaling::Quintic, 717.9980015434974),
];
const ORACLE_SCENES: usize = 3000;
const CONTACT_TOL: f64 = 2e-4;
const MAX_DISAGREEMENT: f64 = 1e-3;
const ALIGN_TOL_RAD: f64 = 1e-6;
const ORACLE_EXPECTED: (usize, usize) = (21, 31);

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

struct Generated {
    _tmp: tempfile::TempDir,
    root: PathBuf,
    elapsed: Duration,
    report_total: usize,
    report_pairs: usize,
}

fn generated() -> &'static Generated {
    static CELL: OnceLock<Generated> = OnceLock::new();
    CELL.get_or_init(|| {
        let tmp = tempfile::tempdir().unwrap();
        let root = tmp.path().join("w1");
        let mut cfg = Config::bundled();
        cfg.generation.per_pair = PER_PAIR;
        let started = Instant::now();
        let report = generate_dataset(&cfg, &GraspTaxonomy::bundled(), "bundled", &root, 1).unwrap();
        Generated {
            elapsed: started.elapsed(),
            report_total: report.total_sequences(),
            report_pairs: report.pairs.len(),
            root,
            _tmp: tmp,
        }
    })
}

fn records() -> Vec<SequenceRecord> {
    let ds = Dataset::open(&generated().root).unwrap();
    ds.sequences().collect::<Result<_, _>>().unwrap()
}

fn dataset_arithmetic() -> Verdict {
    let g = generated();
    let ds = Dataset::open(&g.root).unwrap();
    let rows = ds.manifest.rows.len();
    let mut pairs = BTreeMap::new();
    for r in &ds.manifest.rows {
        *pairs.entry((r.object.clone(), r.part_id.clone())).or_insert(0usize) += 1;
    }
    let even = pairs.values().all(|&n| n == PER_PAIR as usize);
    let pass = rows == EXPECTED_SEQUENCES
        && pairs.len() == EXPECTED_PAIRS
        && g.report_total == rows
        && g.report_pairs == pairs.len()
        && even
        && g.elapsed < MAX_RUNTIME
        && ds.validate(&GraspTaxonomy::bundled()).is_empty();
    verdict(
        pass,
        format!("{rows} sequences over {} pairs in {:.1} s", pairs.len(), g.elapsed.as_secs_f64()),
    )
}

fn minimum_jerk() -> Verdict {
    let exact = min_jerk_s(0.0).unwrap() == 0.0 && min_jerk_s(1.0).unwrap() == 1.0 && min_jerk_s(0.5).unwrap() == 0.5;
    let boundary = [0.0, 1.0]
        .iter()
        .map(|&t| min_jerk_velocity(t).abs().max(min_jerk_acceleration(t).abs()))
        .fold(0.0, f64::max);
    // finite differences of s itself, independent of the derivative formulas
    let h = 1e-4;
    let fd_v0 = (min_jerk_s(h).unwrap() - min_jerk_s(0.0).unwrap()) / h;
    let fd_v1 = (min_jerk_s(1.0).unwrap() - min_jerk_s(1.0 - h).unwrap()) / h;
    let peak = (0..=100_000).map(|i| min_jerk_velocity(i as f64 / 100_000.0)).fold(0.0, f64::max);
    let fd_peak = (min_jerk_s(0.5 + h).unwrap() - min_jerk_s(0.5 - h).unwrap()) / (2.0 * h);
    let costs: Vec<f64> = JERK_PINNED.iter().map(|(s, _)| discrete_jerk_cost(*s, JERK_GRID)).collect();
    let pinned = JERK_PINNED.iter().zip(&costs).all(|((_, want), got)| ((got - want) / want).abs() < 1e-9);
    let ordered = costs[2] < costs[1] && costs[2] < costs[0];
    let pass = exact
        && boundary <= BOUNDARY_TOL
        && fd_v0.abs() < 1e-6
        && fd_v1.abs() < 1e-6
        && (peak - PEAK_VELOCITY).abs() <= PEAK_TOL
        && (fd_peak - PEAK_VELOCITY).abs() < 1e-6
        && pinned
        && ordered;
    verdict(
        pass,
        format!(
            "peak ds/dtau {peak:.9}, boundary max {boundary:.1e}, jerk cost linear {:.6e} cubic {:.6e} quintic {:.6e}",
            costs[0], costs[1], costs[2]
        ),
    )
}

fn oracle_status(hit: Option<(f64, HitTarget)>, target: usize) -> AcceptanceStatus {
    match hit {
        Some((_, HitTarget::PartBox(i))) if i == target => AcceptanceStatus::Accepted,
        Some((_, HitTarget::PartBox(_))) => AcceptanceStatus::RejectedWrongBox,
        Some((_, HitTarget::Mesh)) => AcceptanceStatus::RejectedMeshFirst,
        None => AcceptanceStatus::RejectedNoContact,
    }
}

fn acceptance_rule_oracle() -> Verdict {
    let cfg = Config::bundled();
    let tax = GraspTaxonomy::bundled();
    let pairs: Vec<_> = tax.pairs().collect();
    let mut scenes = 0;
    let mut disagree = 0;
    let mut by_status: BTreeMap<&str, usize> = BTreeMap::new();
    let mut worst_t: f64 = 0.0;
    let mut seed = 0u64;
    while scenes < ORACLE_SCENES {
        let (object, part) = pairs[seed as usize % pairs.len()];
        seed += 1;
        let scene = sample_scene(&cfg.workspace, &cfg.randomization, object, seed).unwrap();
        let start = match sample_start_pose(&cfg.workspace, &scene, object, part, seed) {
            Ok(s) => s,
            Err(SceneError::NotVisible(_)) => continue,
            Err(e) => panic!("{e}"),
        };
        scenes += 1;
        let idx = object.part(&part.part_id).unwrap().0;
        let plan = plan_trajectory(&scene, part, &start, cfg.trajectory.duration_s, cfg.trajectory.fps).unwrap();
        let lib = check_acceptance(&plan, &scene, object, part).unwrap();
        let oracle = dense_first_hit(&plan.start_pose.translation, &plan.end_point, object, &scene.object_pose, idx);
        let status = oracle_status(oracle, idx);
        *by_status.entry(lib.status.name()).or_default() += 1;
        let same = lib.status == status
            && match (lib.t_contact, oracle) {
                (Some(t), Some((t_o, _))) => {
                    worst_t = worst_t.max((t - t_o).abs());
                    (t - t_o).abs() <= CONTACT_TOL
                }
                (None, _) => true,
                (Some(_), None) => false,
            };
        if !same {
            disagree += 1;
        }
    }
    let rate = disagree as f64 / scenes as f64;
    let counts: Vec<String> = by_status.iter().map(|(k, v)| format!("{k} {v}")).collect();
    verdict(
        rate < MAX_DISAGREEMENT,
        format!(
            "{scenes} scenes, {disagree} disagreements ({:.3}%), max |dt| {worst_t:.2e}; {}",
            100.0 * rate,
            counts.join(", ")
        ),
    )
}

fn angle(a: &Vec3, b: &Vec3) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}

fn end_pose_alignment() -> Verdict {
    let tax = GraspTaxonomy::bundled();
    let mut worst: f64 = 0.0;
    let mut worst_last_frame: f64 = 0.0;
    let recs = records();
    for r in &recs {
        let object = tax.object(&r.object).unwrap();
        let (_, part) = object.part(&r.part_id).unwrap();
        let outward = r.scene.object_pose.transform_vector(&part.approach_normal());
        let palm_normal = r.approach.end_orientation * Vec3::z();
        worst = worst.max(angle(&palm_normal, &-outward));
        let last = r.frames.last().unwrap().pose.forward();
        worst_last_frame = worst_last_frame.max(angle(&last, &-outward));
    }
    verdict(
        worst <= ALIGN_TOL_RAD && !recs.is_empty(),
        format!(
            "{} sequences, max end-pose angle {worst:.2e} rad (last recorded frame before contact: max {:.2} deg)",
            recs.len(),
            worst_last_frame.to_degrees()
        ),
    )
}

fn visibility() -> Verdict {
    let cfg = Config::bundled();
    let tax = GraspTaxonomy::bundled();
    let intr = cfg.workspace.intrinsics();
    let offset = cfg.workspace.camera_offset();
    let recs = records();
    let mut ok = 0;
    let mut min_object = usize::MAX;
    for r in &recs {
        let object = tax.object(&r.object).unwrap();
        let stage = Stage::new(&cfg.workspace, &r.scene, object);
        let cam = r.frames[0].pose.compose(&offset);
        let (obj, bg) = object_pixel_stats(&render_labels(&stage, &cam, &intr, false));
        min_object = min_object.min(obj);
        if obj >= 1 && bg >= 1 {
            ok += 1;
        }
    }
    verdict(
        ok == recs.len() && !recs.is_empty(),
        format!("{ok}/{} first frames show object and background (min object pixels {min_object})", recs.len()),
    )
}

fn tree(root: &Path) -> Vec<(String, Vec<u8>)> {
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

fn determinism() -> Verdict {
    let g = generated();
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().join("w8");
    let mut cfg = Config::bundled();
    cfg.generation.per_pair = PER_PAIR;
    generate_dataset(&cfg, &GraspTaxonomy::bundled(), "bundled", &root, 8).unwrap();
    let (a, b) = (tree(&g.root), tree(&root));
    let differing = a.iter().zip(&b).filter(|(x, y)| x != y).count() + a.len().abs_diff(b.len());
    let poses = a.iter().filter(|(n, _)| n.ends_with("poses.csv")).count();
    verdict(
        differing == 0 && poses == EXPECTED_SEQUENCES,
        format!("{} files compared ({poses} pose files), {differing} differ", a.len()),
    )
}

fn oracle_baseline() -> Verdict {
    let tax = GraspTaxonomy::bundled();
    let ds = Dataset::open(&generated().root).unwrap();
    let preds = oracle_single_grasp(&ds.manifest, &tax).unwrap();
    let truth = GroundTruth::from_dataset(&ds, &tax).unwrap();
    let report = score(&[preds], &truth, false).unwrap();
    let (num, den) = ORACLE_EXPECTED;
    let expected = 100.0 * num as f64 / den as f64;
    let raw = RawTaxonomy::parse(GraspTaxonomy::bundled_text());
    verdict(
        (report.mean - expected).abs() < 1e-9,
        format!(
            "measured {:.2}% ({}/{} parts by pre-shape); expected {expected:.2}% ({num}/{den}, which is the grasp-type-level count {})",
            report.mean,
            raw.oracle_preshape_hits(),
            raw.parts.len(),
            raw.oracle_grasp_type_hits()
        ),
    )
}

/// Reference vote: highest non-NoGrasp count, ties to the earlier class.
fn reference_vote(frames: &[PreShape]) -> PreShape {
    let order = [PreShape::Power, PreShape::Lateral, PreShape::Pinch, PreShape::Pinch3Digit];
    let mut best = (PreShape::NoGrasp, 0);
    for c in order {
        let n = frames.iter().filter(|&&f| f == c).count();
        if n > best.1 {
            best = (c, n);
        }
    }
    best.0
}

fn permutations(v: &[PreShape]) -> Vec<Vec<PreShape>> {
    if v.len() <= 1 {
        return vec![v.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..v.len() {
        let mut rest = v.to_vec();
        let head = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, head);
            out.push(p);
        }
    }
    out
}

fn majority_vote_properties() -> Verdict {
    let all = PreShape::ALL;
    let mut multisets = 0;
    let mut failures = 0;
    for len in 1..=4usize {
        // non-decreasing index tuples enumerate each multiset once
        let mut idx = vec![0usize; len];
        loop {
            let frames: Vec<PreShape> = idx.iter().map(|&i| all[i]).collect();
            multisets += 1;
            let want = reference_vote(&frames);
            let got = majority_vote(&frames).unwrap();
            let invariant = permutations(&frames).iter().all(|p| majority_vote(p).unwrap() == got);
            let grasping: Vec<PreShape> = frames.iter().copied().filter(|f| *f != PreShape::NoGrasp).collect();
            let excluded = grasping.is_empty() || majority_vote(&grasping).unwrap() == got;
            if got != want || !invariant || !excluded {
                failures += 1;
            }
            let Some(pos) = (0..len).rev().find(|&k| idx[k] < all.len() - 1) else {
                break;
            };
            idx[pos] += 1;
            for k in pos + 1..len {
                idx[k] = idx[pos];
            }
        }
    }
    let empty_rejected = majority_vote(&[]).is_err();
    verdict(
        failures == 0 && multisets == 125 && empty_rejected,
        format!("{multisets} multisets of length 1..4, {failures} failures"),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 8] = [
        ("dataset arithmetic", dataset_arithmetic),
        ("minimum-jerk correctness", minimum_jerk),
        ("acceptance-rule oracle equivalence", acceptance_rule_oracle),
        ("end-pose alignment", end_pose_alignment),
        ("visibility at frame 0", visibility),
        ("determinism across worker counts", determinism),
        ("single-grasp oracle baseline", oracle_baseline),
        ("majority-vote properties", majority_vote_properties),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let v = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            verdict(false, format!("panicked: {msg}"))
        });
        println!("{} {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        failed += usize::from(!v.pass);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
