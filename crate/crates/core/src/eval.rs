//! Scoring of per-frame predictions: majority-vote per-video accuracy over
//! trials, time-resolved accuracy, and the single-grasp oracle baseline.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::dataset::{Dataset, DatasetError, DatasetManifest};
use crate::taxonomy::{GraspTaxonomy, PreShape, TaxonomyError};
use crate::textfmt::g9;

pub const PREDICTION_HEADER: [&str; 3] = ["seq_id", "frame", "pred"];
pub const SCORE_COLUMNS: [&str; 5] = ["s_power", "s_lateral", "s_pinch", "s_pinch3", "s_nograsp"];

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("majority vote over an empty frame list")]
    EmptyVote,
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("trial {trial}: no predictions for sequence {seq_id}")]
    MissingSequence { trial: usize, seq_id: String },
    #[error("trial {trial}: sequence {seq_id} has {found} predicted frames, expected {expected}")]
    FrameCount {
        trial: usize,
        seq_id: String,
        found: usize,
        expected: usize,
    },
    #[error("no trials to score")]
    NoTrials,
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

/// Most frequent non-`NoGrasp` class; ties go to the class listed first in
/// [`PreShape::GRASPING`]. All-`NoGrasp` input votes `NoGrasp`.
pub fn majority_vote(frames: &[PreShape]) -> Result<PreShape, EvalError> {
    if frames.is_empty() {
        return Err(EvalError::EmptyVote);
    }
    let mut counts = [0usize; 5];
    for p in frames {
        counts[p.index()] += 1;
    }
    let mut best = PreShape::NoGrasp;
    let mut best_count = 0;
    for c in PreShape::GRASPING {
        if counts[c.index()] > best_count {
            best = c;
            best_count = counts[c.index()];
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRow {
    pub seq_id: String,
    pub frame: usize,
    pub pred: PreShape,
    /// Class scores in [`PreShape::ALL`] order.
    pub scores: Option<[f64; 5]>,
}

/// Per-frame predictions, grouped by sequence with frames contiguous from 0.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PredictionFile {
    sequences: BTreeMap<String, Vec<PredictionRow>>,
}

impl PredictionFile {
    /// Groups rows by sequence; frames of each sequence must be exactly
    /// `0..n` in some order.
    pub fn from_rows(rows: Vec<PredictionRow>) -> Result<PredictionFile, String> {
        let mut sequences: BTreeMap<String, Vec<PredictionRow>> = BTreeMap::new();
        for r in rows {
            sequences.entry(r.seq_id.clone()).or_default().push(r);
        }
        for (id, rows) in sequences.iter_mut() {
            rows.sort_by_key(|r| r.frame);
            if let Some((k, r)) = rows.iter().enumerate().find(|(k, r)| r.frame != *k) {
                return Err(format!("sequence {id}: frame {} where {k} was expected", r.frame));
            }
        }
        Ok(PredictionFile { sequences })
    }

    pub fn sequence(&self, seq_id: &str) -> Option<&[PredictionRow]> {
        self.sequences.get(seq_id).map(Vec::as_slice)
    }

    pub fn seq_ids(&self) -> impl Iterator<Item = &str> {
        self.sequences.keys().map(String::as_str)
    }

    pub fn rows(&self) -> impl Iterator<Item = &PredictionRow> {
        self.sequences.values().flatten()
    }

    pub fn to_csv(&self) -> String {
        let with_scores = self.rows().any(|r| r.scores.is_some());
        let mut out = PREDICTION_HEADER.join(",");
        if with_scores {
            out += ",";
            out += &SCORE_COLUMNS.join(",");
        }
        out.push('\n');
        for r in self.rows() {
            let _ = write!(out, "{},{},{}", r.seq_id, r.frame, r.pred.name());
            if with_scores {
                for s in r.scores.unwrap_or([0.0; 5]) {
                    let _ = write!(out, ",{}", g9(s));
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<(), EvalError> {
        std::fs::write(path, self.to_csv()).map_err(|source| EvalError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn read(path: &Path) -> Result<PredictionFile, EvalError> {
        let text = std::fs::read_to_string(path).map_err(|source| EvalError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text).map_err(|(line, message)| EvalError::Parse {
            path: path.to_path_buf(),
            line,
            message,
        })
    }

    /// Parses CSV text; errors carry a 1-based line number (0 for errors
    /// about the file as a whole).
    pub fn parse(text: &str) -> Result<PredictionFile, (usize, String)> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(text.as_bytes());
        let header = reader.headers().map_err(|e| (1, e.to_string()))?.clone();
        let base: Vec<&str> = PREDICTION_HEADER.to_vec();
        let full: Vec<&str> = PREDICTION_HEADER.iter().chain(SCORE_COLUMNS.iter()).copied().collect();
        let found: Vec<&str> = header.iter().collect();
        let with_scores = if found == full {
            true
        } else if found == base {
            false
        } else {
            return Err((1, format!("unexpected header {:?}", found.join(","))));
        };
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| (e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            if rec.len() != found.len() {
                return Err((line, format!("expected {} fields, found {}", found.len(), rec.len())));
            }
            let frame = rec[1].parse().map_err(|_| (line, format!("bad frame {:?}", &rec[1])))?;
            let pred = rec[2].parse().map_err(|e: crate::taxonomy::UnknownName| (line, e.to_string()))?;
            let scores = if with_scores {
                let mut s = [0.0; 5];
                for (i, slot) in s.iter_mut().enumerate() {
                    *slot = rec[3 + i].parse().map_err(|_| (line, format!("bad {} {:?}", SCORE_COLUMNS[i], &rec[3 + i])))?;
                }
                Some(s)
            } else {
                None
            };
            rows.push(PredictionRow {
                seq_id: rec[0].to_string(),
                frame,
                pred,
                scores,
            });
        }
        Self::from_rows(rows).map_err(|m| (0, m))
    }
}

/// Reference data for one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthSequence {
    pub seq_id: String,
    pub object: String,
    pub pre_shape: PreShape,
    pub multi_grasp: bool,
    pub fps: f64,
    pub frame_labels: Vec<PreShape>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruth {
    pub sequences: Vec<TruthSequence>,
}

impl GroundTruth {
    /// From manifest rows alone; every frame is assumed to carry the
    /// sequence pre-shape.
    pub fn from_manifest(manifest: &DatasetManifest, taxonomy: &GraspTaxonomy) -> Result<GroundTruth, EvalError> {
        let sequences = manifest
            .rows
            .iter()
            .map(|r| {
                Ok(TruthSequence {
                    seq_id: r.seq_id.clone(),
                    object: r.object.clone(),
                    pre_shape: r.pre_shape,
                    multi_grasp: taxonomy.object(&r.object)?.is_multi_grasp(),
                    fps: r.fps,
                    frame_labels: vec![r.pre_shape; r.num_frames],
                })
            })
            .collect::<Result<_, EvalError>>()?;
        Ok(GroundTruth { sequences })
    }

    /// With per-frame labels read from each sequence's poses.
    pub fn from_dataset(dataset: &Dataset, taxonomy: &GraspTaxonomy) -> Result<GroundTruth, EvalError> {
        let mut truth = Self::from_manifest(&dataset.manifest, taxonomy)?;
        for (t, row) in truth.sequences.iter_mut().zip(&dataset.manifest.rows) {
            let record = dataset.load_sequence(row)?;
            t.frame_labels = record.frames.iter().map(|f| f.label).collect();
        }
        Ok(truth)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Split {
    All,
    Single,
    Multi,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::All => "all",
            Split::Single => "single",
            Split::Multi => "multi",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub t_s: f64,
    pub split: Split,
    /// Percent.
    pub accuracy: f64,
    /// Frames that contributed.
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialScore {
    pub correct: usize,
    pub total: usize,
    pub single: (usize, usize),
    pub multi: (usize, usize),
}

impl TrialScore {
    pub fn accuracy(&self) -> f64 {
        percent(self.correct, self.total)
    }
}

fn percent(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub per_trial: Vec<TrialScore>,
    pub mean: f64,
    /// Sample (n - 1) standard deviation; 0 for a single trial.
    pub std: f64,
    /// Mean over trials; `None` when the split is empty.
    pub single_grasp_acc: Option<f64>,
    pub multi_grasp_acc: Option<f64>,
    pub time_curve: Vec<CurvePoint>,
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn trial_predictions<'a>(
    trial: usize,
    preds: &'a PredictionFile,
    seq: &TruthSequence,
) -> Result<&'a [PredictionRow], EvalError> {
    let rows = preds.sequence(&seq.seq_id).ok_or_else(|| EvalError::MissingSequence {
        trial,
        seq_id: seq.seq_id.clone(),
    })?;
    if rows.len() != seq.frame_labels.len() {
        return Err(EvalError::FrameCount {
            trial,
            seq_id: seq.seq_id.clone(),
            found: rows.len(),
            expected: seq.frame_labels.len(),
        });
    }
    Ok(rows)
}

/// Per-video majority-vote accuracy of every trial, with the time curve
/// pooled over trials.
pub fn score(trials: &[PredictionFile], truth: &GroundTruth, count_nograsp: bool) -> Result<EvalReport, EvalError> {
    if trials.is_empty() {
        return Err(EvalError::NoTrials);
    }
    let mut per_trial = Vec::with_capacity(trials.len());
    for (i, preds) in trials.iter().enumerate() {
        let mut s = TrialScore {
            correct: 0,
            total: 0,
            single: (0, 0),
            multi: (0, 0),
        };
        for seq in &truth.sequences {
            let rows = trial_predictions(i, preds, seq)?;
            let frames: Vec<PreShape> = rows.iter().map(|r| r.pred).collect();
            let hit = usize::from(majority_vote(&frames)? == seq.pre_shape);
            s.correct += hit;
            s.total += 1;
            let split = if seq.multi_grasp { &mut s.multi } else { &mut s.single };
            split.0 += hit;
            split.1 += 1;
        }
        per_trial.push(s);
    }
    let accs: Vec<f64> = per_trial.iter().map(TrialScore::accuracy).collect();
    let (mean, std) = mean_std(&accs);
    let split_mean = |f: fn(&TrialScore) -> (usize, usize)| {
        let v: Vec<f64> = per_trial.iter().map(f).filter(|s| s.1 > 0).map(|(c, n)| percent(c, n)).collect();
        (!v.is_empty()).then(|| mean_std(&v).0)
    };
    Ok(EvalReport {
        single_grasp_acc: split_mean(|t| t.single),
        multi_grasp_acc: split_mean(|t| t.multi),
        time_curve: time_resolved_accuracy(trials, truth, true, count_nograsp)?,
        per_trial,
        mean,
        std,
    })
}

/// Per-frame accuracy at each frame time `k / fps`, over every sequence (and
/// trial) having a frame at that time. Frames whose reference label is
/// `NoGrasp` are skipped unless `count_nograsp`.
pub fn time_resolved_accuracy(
    trials: &[PredictionFile],
    truth: &GroundTruth,
    split_by_multigrasp: bool,
    count_nograsp: bool,
) -> Result<Vec<CurvePoint>, EvalError> {
    // keyed by microseconds so that equal times from different fps agree
    let mut tally: BTreeMap<(Split, i64), (usize, usize)> = BTreeMap::new();
    for (i, preds) in trials.iter().enumerate() {
        for seq in &truth.sequences {
            let rows = trial_predictions(i, preds, seq)?;
            let split = if seq.multi_grasp { Split::Multi } else { Split::Single };
            for (k, (row, label)) in rows.iter().zip(&seq.frame_labels).enumerate() {
                if *label == PreShape::NoGrasp && !count_nograsp {
                    continue;
                }
                let key = (k as f64 / seq.fps * 1e6).round() as i64;
                let hit = usize::from(row.pred == *label);
                let mut bump = |s: Split| {
                    let e = tally.entry((s, key)).or_default();
                    e.0 += hit;
                    e.1 += 1;
                };
                bump(Split::All);
                if split_by_multigrasp {
                    bump(split);
                }
            }
        }
    }
    Ok(tally
        .into_iter()
        .map(|((split, key), (c, n))| CurvePoint {
            t_s: key as f64 / 1e6,
            split,
            accuracy: percent(c, n),
            n,
        })
        .collect())
}

/// Predicts, for every frame, the pre-shape of the object's modal grasp
/// type: a perfect object classifier restricted to one grasp per object.
pub fn oracle_single_grasp(manifest: &DatasetManifest, taxonomy: &GraspTaxonomy) -> Result<PredictionFile, EvalError> {
    let mut cache: HashMap<&str, PreShape> = HashMap::new();
    let mut rows = Vec::new();
    for r in &manifest.rows {
        let pred = match cache.get(r.object.as_str()) {
            Some(p) => *p,
            None => {
                let p = taxonomy.preshape_of(taxonomy.modal_grasp(&r.object)?);
                cache.insert(&r.object, p);
                p
            }
        };
        rows.extend((0..r.num_frames).map(|frame| PredictionRow {
            seq_id: r.seq_id.clone(),
            frame,
            pred,
            scores: None,
        }));
    }
    Ok(PredictionFile::from_rows(rows).expect("frames generated contiguously"))
}

impl EvalReport {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "trials: {}", self.per_trial.len());
        for (i, t) in self.per_trial.iter().enumerate() {
            let _ = writeln!(
                out,
                "trial {i}: {}/{} = {:.2}% (single {}/{}, multi {}/{})",
                t.correct,
                t.total,
                t.accuracy(),
                t.single.0,
                t.single.1,
                t.multi.0,
                t.multi.1
            );
        }
        let _ = writeln!(out, "per-video accuracy: {:.2} +- {:.2} %", self.mean, self.std);
        let fmt = |v: Option<f64>| v.map_or("n/a".to_string(), |a| format!("{a:.2}%"));
        let _ = writeln!(out, "single-grasp objects: {}", fmt(self.single_grasp_acc));
        let _ = writeln!(out, "multi-grasp objects: {}", fmt(self.multi_grasp_acc));
        out
    }

    /// `t_s,split,accuracy,n`.
    pub fn curve_csv(&self) -> String {
        let mut out = String::from("t_s,split,accuracy,n\n");
        for p in &self.time_curve {
            let _ = writeln!(out, "{},{},{},{}", g9(p.t_s), p.split.name(), g9(p.accuracy), p.n);
        }
        out
    }
}
