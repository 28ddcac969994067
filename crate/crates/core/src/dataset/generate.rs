use std::fmt;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;

use super::{seq_id, write_dataset, ApproachRecord, DatasetError, FrameRecord, SequenceRecord};
use crate::config::Config;
use crate::rng::{sequence_stream, stream_rng};
use crate::scene::{sample_scene, sample_start_pose, SceneError};
use crate::taxonomy::{GraspTaxonomy, ObjectSpec, PartSpec, PreShape};
use crate::trajectory::{check_acceptance, plan_trajectory, truncate_at_contact, AcceptanceStatus, TrajectoryError};

/// Why attempts were thrown away.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RejectionCounts {
    pub not_visible: u64,
    pub mesh_first: u64,
    pub wrong_box: u64,
    pub no_contact: u64,
    /// Contact so early that fewer than two frames would remain.
    pub too_short: u64,
}

impl RejectionCounts {
    fn add(&mut self, other: &RejectionCounts) {
        self.not_visible += other.not_visible;
        self.mesh_first += other.mesh_first;
        self.wrong_box += other.wrong_box;
        self.no_contact += other.no_contact;
        self.too_short += other.too_short;
    }

    pub fn total(&self) -> u64 {
        self.not_visible + self.mesh_first + self.wrong_box + self.no_contact + self.too_short
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairFailure {
    pub object: String,
    pub part_id: String,
    pub sequence_index: u32,
    pub attempts: u32,
    pub rejections: RejectionCounts,
}

impl fmt::Display for PairFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = &self.rejections;
        write!(
            f,
            "{}/{} sequence {} found no accepted approach in {} attempts (not visible {}, mesh first {}, wrong box {}, too short {})",
            self.object, self.part_id, self.sequence_index, self.attempts, r.not_visible, r.mesh_first, r.wrong_box, r.too_short
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairCoverage {
    pub object: String,
    pub part_id: String,
    pub grasp_type: crate::taxonomy::GraspType,
    pub pre_shape: PreShape,
    pub sequences: usize,
    pub attempts: u64,
    pub rejections: RejectionCounts,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GenerationReport {
    pub pairs: Vec<PairCoverage>,
}

impl GenerationReport {
    pub fn total_sequences(&self) -> usize {
        self.pairs.iter().map(|p| p.sequences).sum()
    }

    /// Fixed-width coverage table, one line per pair.
    pub fn table(&self) -> String {
        let mut out = format!(
            "{:<14} {:<12} {:<18} {:<12} {:>5} {:>8} {:>8} {:>8} {:>8}\n",
            "object", "part", "grasp_type", "pre_shape", "seqs", "attempts", "hidden", "mesh", "wrongbox"
        );
        for p in &self.pairs {
            out += &format!(
                "{:<14} {:<12} {:<18} {:<12} {:>5} {:>8} {:>8} {:>8} {:>8}\n",
                p.object,
                p.part_id,
                p.grasp_type.name(),
                p.pre_shape.name(),
                p.sequences,
                p.attempts,
                p.rejections.not_visible,
                p.rejections.mesh_first,
                p.rejections.wrong_box
            );
        }
        out += &format!("total: {} sequences over {} pairs\n", self.total_sequences(), self.pairs.len());
        out
    }
}

struct Attempted {
    record: Option<SequenceRecord>,
    attempts: u32,
    rejections: RejectionCounts,
}

fn generate_one(
    cfg: &Config,
    taxonomy: &GraspTaxonomy,
    object: &ObjectSpec,
    part: &PartSpec,
    pair_index: u32,
    seq_index: u32,
) -> Result<Attempted, DatasetError> {
    let ws = &cfg.workspace;
    let traj = &cfg.trajectory;
    let mut seeds = stream_rng(cfg.generation.master_seed, sequence_stream(pair_index, seq_index));
    let mut rejections = RejectionCounts::default();
    let fail = |e: &dyn std::error::Error| DatasetError::Sequence {
        seq_id: seq_id(&object.name, &part.part_id, seq_index),
        message: e.to_string(),
    };
    for attempt in 1..=cfg.generation.max_attempts {
        let seed: u64 = seeds.random();
        let scene = sample_scene(ws, &cfg.randomization, object, seed).map_err(|e| fail(&e))?;
        let start = match sample_start_pose(ws, &scene, object, part, seed) {
            Ok(p) => p,
            Err(SceneError::NotVisible(_)) => {
                rejections.not_visible += 1;
                continue;
            }
            Err(e) => return Err(fail(&e)),
        };
        let plan = plan_trajectory(&scene, part, &start, traj.duration_s, traj.fps).map_err(|e| fail(&e))?;
        let outcome = check_acceptance(&plan, &scene, object, part).map_err(|e| fail(&e))?;
        match outcome.status {
            AcceptanceStatus::Accepted => {}
            AcceptanceStatus::RejectedMeshFirst => {
                rejections.mesh_first += 1;
                continue;
            }
            AcceptanceStatus::RejectedWrongBox => {
                rejections.wrong_box += 1;
                continue;
            }
            AcceptanceStatus::RejectedNoContact => {
                rejections.no_contact += 1;
                continue;
            }
        }
        let t_contact = outcome.t_contact.expect("accepted outcomes carry t_contact");
        let cut = match truncate_at_contact(&plan, t_contact) {
            Ok(c) => c,
            Err(TrajectoryError::Degenerate { .. }) => {
                rejections.too_short += 1;
                continue;
            }
            Err(e) => return Err(fail(&e)),
        };
        let pre_shape = taxonomy.preshape_of(part.grasp_type);
        let n = cut.frames.len();
        let tail = ((traj.no_grasp_tail_s * traj.fps).round() as usize).min(n - 1);
        let frames = cut
            .frames
            .iter()
            .enumerate()
            .map(|(k, f)| FrameRecord {
                t_s: f.t_s,
                pose: f.pose,
                label: if k >= n - tail { PreShape::NoGrasp } else { pre_shape },
            })
            .collect();
        return Ok(Attempted {
            record: Some(SequenceRecord {
                seq_id: seq_id(&object.name, &part.part_id, seq_index),
                object: object.name.clone(),
                part_id: part.part_id.clone(),
                grasp_type: part.grasp_type,
                pre_shape,
                seed,
                fps: traj.fps,
                frames,
                scene,
                approach: ApproachRecord {
                    start_pose: plan.start_pose,
                    end_point: plan.end_point,
                    end_orientation: plan.end_orientation,
                    t_contact,
                    duration_s: plan.duration_s,
                },
                render_dir: None,
            }),
            attempts: attempt,
            rejections,
        });
    }
    Ok(Attempted {
        record: None,
        attempts: cfg.generation.max_attempts,
        rejections,
    })
}

pub(crate) fn thread_pool(workers: usize) -> Result<rayon::ThreadPool, DatasetError> {
    if workers == 0 {
        return Err(DatasetError::Invalid("workers must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| DatasetError::Invalid(format!("cannot start worker pool: {e}")))
}

/// Generates `per_pair` accepted sequences for every (object, part) pair, in
/// taxonomy order. Output does not depend on `workers`.
pub fn generate_sequences(
    cfg: &Config,
    taxonomy: &GraspTaxonomy,
    workers: usize,
) -> Result<(Vec<SequenceRecord>, GenerationReport), DatasetError> {
    cfg.validate()?;
    let per_pair = cfg.generation.per_pair;
    let jobs: Vec<(u32, &ObjectSpec, &PartSpec, u32)> = taxonomy
        .pairs()
        .enumerate()
        .flat_map(|(p, (o, part))| (0..per_pair).map(move |j| (p as u32, o, part, j)))
        .collect();
    let results: Vec<Result<Attempted, DatasetError>> = thread_pool(workers)?.install(|| {
        jobs.par_iter()
            .map(|&(p, o, part, j)| generate_one(cfg, taxonomy, o, part, p, j))
            .collect()
    });

    let mut records = Vec::with_capacity(jobs.len());
    let mut failures = Vec::new();
    let mut report = GenerationReport::default();
    for (&(p, o, part, j), result) in jobs.iter().zip(results) {
        let attempted = result?;
        if report.pairs.len() <= p as usize {
            report.pairs.push(PairCoverage {
                object: o.name.clone(),
                part_id: part.part_id.clone(),
                grasp_type: part.grasp_type,
                pre_shape: taxonomy.preshape_of(part.grasp_type),
                sequences: 0,
                attempts: 0,
                rejections: RejectionCounts::default(),
            });
        }
        let cov = &mut report.pairs[p as usize];
        cov.attempts += u64::from(attempted.attempts);
        cov.rejections.add(&attempted.rejections);
        match attempted.record {
            Some(r) => {
                cov.sequences += 1;
                records.push(r);
            }
            None => failures.push(PairFailure {
                object: o.name.clone(),
                part_id: part.part_id.clone(),
                sequence_index: j,
                attempts: attempted.attempts,
                rejections: attempted.rejections,
            }),
        }
    }
    if !failures.is_empty() {
        // one entry per pair is enough to point at the authoring problem
        failures.dedup_by(|a, b| a.object == b.object && a.part_id == b.part_id);
        return Err(DatasetError::Unreachable(failures));
    }
    Ok((records, report))
}

/// Generates and writes a complete dataset under `out`.
pub fn generate_dataset(
    cfg: &Config,
    taxonomy: &GraspTaxonomy,
    taxonomy_ref: &str,
    out: &Path,
    workers: usize,
) -> Result<GenerationReport, DatasetError> {
    let (mut records, report) = generate_sequences(cfg, taxonomy, workers)?;
    write_dataset(out, cfg, taxonomy, taxonomy_ref, &mut records, workers)?;
    Ok(report)
}
