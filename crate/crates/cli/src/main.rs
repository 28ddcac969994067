//! `preshape-forge`: generate, validate, render and score synthetic grasp
//! pre-shape datasets.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::OnceLock;

use anyhow::{bail, Context, Result};
use clap::parser::ValueSource;
use clap::{ArgAction, ArgMatches, Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use preshape_forge::config::Config;
use preshape_forge::dataset::{generate_dataset, Dataset, DatasetError};
use preshape_forge::eval::{oracle_single_grasp, score, GroundTruth, PredictionFile};
use preshape_forge::render::{render_frame, write_frame_files, Stage};
use preshape_forge::taxonomy::{GraspTaxonomy, BUNDLED_REF};

fn defaults() -> &'static Config {
    static D: OnceLock<Config> = OnceLock::new();
    D.get_or_init(Config::bundled)
}

#[derive(Parser, Debug)]
#[command(name = "preshape-forge", version, about = "Synthetic eye-in-hand grasp sequences and pre-shape evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a dataset of approach sequences.
    Generate(GenerateArgs),
    /// Re-check every invariant of a dataset.
    Validate(ValidateArgs),
    /// Render the frames of one sequence as PNM images.
    RenderPreview(RenderArgs),
    /// Write the single-grasp oracle's per-frame predictions.
    Oracle(OracleArgs),
    /// Score prediction files against a dataset.
    Eval(EvalArgs),
}

#[derive(Args, Debug)]
struct GenerateArgs {
    /// Output directory; must be empty or absent.
    #[arg(long)]
    out: PathBuf,
    /// TOML file overriding any subset of the bundled config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Taxonomy file, or "bundled".
    #[arg(long, default_value = BUNDLED_REF)]
    taxonomy: String,
    /// Worker threads; output bytes do not depend on this.
    #[arg(long, default_value_t = 1)]
    workers: usize,

    /// Accepted sequences per (object, part) pair.
    #[arg(long, default_value_t = defaults().generation.per_pair)]
    per_pair: u32,
    /// Master seed.
    #[arg(long, env = "PRESHAPE_FORGE_SEED", default_value_t = defaults().generation.master_seed)]
    seed: u64,
    /// Attempts per sequence before a pair is reported unreachable.
    #[arg(long, default_value_t = defaults().generation.max_attempts)]
    max_attempts: u32,
    /// Render RGB, depth and label images for every frame.
    #[arg(long, action = ArgAction::Set, num_args = 0..=1, default_missing_value = "true",
          default_value_t = defaults().generation.render)]
    render: bool,
    /// Draw part boxes into the label images.
    #[arg(long, action = ArgAction::Set, num_args = 0..=1, default_missing_value = "true",
          default_value_t = defaults().generation.label_parts)]
    label_parts: bool,

    /// Planned movement duration in seconds.
    #[arg(long, default_value_t = defaults().trajectory.duration_s)]
    duration_s: f64,
    /// Frame rate.
    #[arg(long, default_value_t = defaults().trajectory.fps)]
    fps: f64,
    /// Seconds of NoGrasp-labeled frames at the end of each sequence.
    #[arg(long, default_value_t = defaults().trajectory.no_grasp_tail_s)]
    no_grasp_tail_s: f64,

    /// Room size x,y,z in meters.
    #[arg(long, value_delimiter = ',', value_name = "X,Y,Z", default_values_t = defaults().workspace.room_extents)]
    room_extents: Vec<f64>,
    /// Height of the table top in meters.
    #[arg(long, default_value_t = defaults().workspace.table_top_height)]
    table_top_height: f64,
    /// Table top size x,y in meters.
    #[arg(long, value_delimiter = ',', value_name = "X,Y", default_values_t = defaults().workspace.table_extents)]
    table_extents: Vec<f64>,
    /// Distance of the start plane from the table's front edge.
    #[arg(long, default_value_t = defaults().workspace.start_plane_distance)]
    start_plane_distance: f64,
    /// Start window width,height on the start plane.
    #[arg(long, value_delimiter = ',', value_name = "W,H", default_values_t = defaults().workspace.start_plane_window)]
    start_plane_window: Vec<f64>,
    /// Height of the start window center above the table top.
    #[arg(long, default_value_t = defaults().workspace.start_window_height)]
    start_window_height: f64,
    /// Horizontal field of view in degrees.
    #[arg(long, default_value_t = defaults().workspace.camera_fov_deg)]
    camera_fov_deg: f64,
    /// Image width,height in pixels.
    #[arg(long, value_delimiter = ',', value_name = "W,H", default_values_t = defaults().workspace.image_size)]
    image_size: Vec<u32>,
    /// Camera position in the palm frame.
    #[arg(long, value_delimiter = ',', value_name = "X,Y,Z", default_values_t = defaults().workspace.camera_offset, allow_negative_numbers = true)]
    camera_offset: Vec<f64>,

    /// Wall texture pool.
    #[arg(long, value_delimiter = ',', default_values_t = defaults().randomization.wall_textures.clone())]
    wall_textures: Vec<String>,
    /// Floor texture pool.
    #[arg(long, value_delimiter = ',', default_values_t = defaults().randomization.floor_textures.clone())]
    floor_textures: Vec<String>,
    /// Table texture pool.
    #[arg(long, value_delimiter = ',', default_values_t = defaults().randomization.table_textures.clone())]
    table_textures: Vec<String>,
    /// Light intensity range lo,hi.
    #[arg(long, value_delimiter = ',', value_name = "LO,HI", default_values_t = defaults().randomization.light_intensity_range)]
    light_intensity_range: Vec<f64>,
    /// Half-angle of the light direction cone around straight down, degrees.
    #[arg(long, default_value_t = defaults().randomization.light_direction_cone_deg)]
    light_direction_cone_deg: f64,
    /// Object yaw range lo,hi in degrees.
    #[arg(long, value_delimiter = ',', value_name = "LO,HI", default_values_t = defaults().randomization.object_yaw_range_deg, allow_negative_numbers = true)]
    object_yaw_range_deg: Vec<f64>,
    /// Maximum object offset x,y from the table center.
    #[arg(long, value_delimiter = ',', value_name = "X,Y", default_values_t = defaults().randomization.object_xy_jitter)]
    object_xy_jitter: Vec<f64>,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    /// Dataset directory.
    dataset: PathBuf,
    /// Taxonomy file, or "bundled"; defaults to the one recorded in the dataset.
    #[arg(long)]
    taxonomy: Option<String>,
}

#[derive(Args, Debug)]
struct RenderArgs {
    /// Dataset directory.
    dataset: PathBuf,
    /// Sequence to render.
    #[arg(long)]
    seq_id: String,
    /// Output directory for the image files.
    #[arg(long)]
    out: PathBuf,
    /// Render every n-th frame.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    stride: u32,
    /// Draw part boxes into the label images.
    #[arg(long, action = ArgAction::Set, num_args = 0..=1, default_missing_value = "true", default_value_t = false)]
    label_parts: bool,
    /// Taxonomy file, or "bundled"; defaults to the one recorded in the dataset.
    #[arg(long)]
    taxonomy: Option<String>,
}

#[derive(Args, Debug)]
struct OracleArgs {
    /// Dataset directory.
    dataset: PathBuf,
    /// Prediction CSV to write.
    #[arg(long)]
    out: PathBuf,
    /// Taxonomy file, or "bundled"; defaults to the one recorded in the dataset.
    #[arg(long)]
    taxonomy: Option<String>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Dataset directory.
    dataset: PathBuf,
    /// Prediction CSV files, one per trial.
    #[arg(long = "predictions", num_args = 1.., required_unless_present = "oracle")]
    predictions: Vec<PathBuf>,
    /// Score the single-grasp oracle instead of prediction files.
    #[arg(long, conflicts_with = "predictions")]
    oracle: bool,
    /// Count NoGrasp-labeled frames in the time-resolved accuracy.
    #[arg(long, action = ArgAction::Set, num_args = 0..=1, default_missing_value = "true",
          default_value_t = defaults().eval.count_nograsp)]
    count_nograsp: bool,
    /// Directory to write report.txt and curve.csv into.
    #[arg(long)]
    report_dir: Option<PathBuf>,
    /// Taxonomy file, or "bundled"; defaults to the one recorded in the dataset.
    #[arg(long)]
    taxonomy: Option<String>,
}

fn explicit(m: &ArgMatches, id: &str) -> bool {
    matches!(m.value_source(id), Some(ValueSource::CommandLine | ValueSource::EnvVariable))
}

fn arr<T: Copy, const N: usize>(id: &str, v: &[T]) -> Result<[T; N]> {
    v.try_into().map_err(|_| anyhow::anyhow!("--{} takes {N} comma-separated values, got {}", id.replace('_', "-"), v.len()))
}

/// Bundled defaults, then the config file, then explicit flags.
fn resolve_config(a: &GenerateArgs, m: &ArgMatches) -> Result<Config> {
    let mut cfg = match &a.config {
        Some(path) => Config::load(path)?,
        None => Config::bundled(),
    };
    macro_rules! set {
        ($id:literal, $field:expr, $value:expr) => {
            if explicit(m, $id) {
                $field = $value;
            }
        };
    }
    set!("per_pair", cfg.generation.per_pair, a.per_pair);
    set!("seed", cfg.generation.master_seed, a.seed);
    set!("max_attempts", cfg.generation.max_attempts, a.max_attempts);
    set!("render", cfg.generation.render, a.render);
    set!("label_parts", cfg.generation.label_parts, a.label_parts);
    set!("duration_s", cfg.trajectory.duration_s, a.duration_s);
    set!("fps", cfg.trajectory.fps, a.fps);
    set!("no_grasp_tail_s", cfg.trajectory.no_grasp_tail_s, a.no_grasp_tail_s);
    let ws = &mut cfg.workspace;
    set!("room_extents", ws.room_extents, arr("room_extents", &a.room_extents)?);
    set!("table_top_height", ws.table_top_height, a.table_top_height);
    set!("table_extents", ws.table_extents, arr("table_extents", &a.table_extents)?);
    set!("start_plane_distance", ws.start_plane_distance, a.start_plane_distance);
    set!("start_plane_window", ws.start_plane_window, arr("start_plane_window", &a.start_plane_window)?);
    set!("start_window_height", ws.start_window_height, a.start_window_height);
    set!("camera_fov_deg", ws.camera_fov_deg, a.camera_fov_deg);
    set!("image_size", ws.image_size, arr("image_size", &a.image_size)?);
    set!("camera_offset", ws.camera_offset, arr("camera_offset", &a.camera_offset)?);
    let r = &mut cfg.randomization;
    set!("wall_textures", r.wall_textures, a.wall_textures.clone());
    set!("floor_textures", r.floor_textures, a.floor_textures.clone());
    set!("table_textures", r.table_textures, a.table_textures.clone());
    set!("light_intensity_range", r.light_intensity_range, arr("light_intensity_range", &a.light_intensity_range)?);
    set!("light_direction_cone_deg", r.light_direction_cone_deg, a.light_direction_cone_deg);
    set!("object_yaw_range_deg", r.object_yaw_range_deg, arr("object_yaw_range_deg", &a.object_yaw_range_deg)?);
    set!("object_xy_jitter", r.object_xy_jitter, arr("object_xy_jitter", &a.object_xy_jitter)?);
    cfg.validate()?;
    Ok(cfg)
}

fn echo_config(cfg: &Config, extra: &[(&str, String)]) {
    eprintln!("# resolved config");
    for (k, v) in extra {
        eprintln!("# {k} = {v}");
    }
    eprint!("{}", cfg.to_toml());
}

/// Taxonomy reference as stored in dataset metadata: "bundled" or an
/// absolute path.
fn taxonomy_ref(reference: &str) -> Result<String> {
    if reference == BUNDLED_REF {
        return Ok(reference.to_string());
    }
    let path = std::fs::canonicalize(reference).with_context(|| format!("taxonomy {reference}"))?;
    Ok(path.display().to_string())
}

fn open(dataset: &Path, taxonomy: &Option<String>) -> Result<(Dataset, GraspTaxonomy)> {
    let ds = Dataset::open(dataset)?;
    let reference = taxonomy.clone().unwrap_or_else(|| ds.meta.taxonomy.clone());
    let tax = GraspTaxonomy::from_reference(&reference).with_context(|| format!("taxonomy {reference}"))?;
    Ok((ds, tax))
}

fn cmd_generate(a: &GenerateArgs, m: &ArgMatches) -> Result<ExitCode> {
    let cfg = resolve_config(a, m)?;
    let reference = taxonomy_ref(&a.taxonomy)?;
    echo_config(
        &cfg,
        &[
            ("taxonomy", reference.clone()),
            ("out", a.out.display().to_string()),
            ("workers", a.workers.to_string()),
        ],
    );
    let tax = GraspTaxonomy::from_reference(&reference)?;
    match generate_dataset(&cfg, &tax, &reference, &a.out, a.workers) {
        Ok(report) => {
            print!("{}", report.table());
            Ok(ExitCode::SUCCESS)
        }
        Err(DatasetError::Unreachable(failures)) => {
            eprintln!("error: {} pair(s) unreachable", failures.len());
            for f in failures {
                eprintln!("  {f}");
            }
            Ok(ExitCode::from(3))
        }
        Err(e) => Err(e.into()),
    }
}

fn cmd_validate(a: &ValidateArgs) -> Result<ExitCode> {
    let (ds, tax) = open(&a.dataset, &a.taxonomy)?;
    echo_config(&ds.meta.config, &[("taxonomy", ds.meta.taxonomy.clone())]);
    let violations = ds.validate(&tax);
    for v in &violations {
        println!("{v}");
    }
    println!("{} sequences, {} violations", ds.manifest.rows.len(), violations.len());
    Ok(if violations.is_empty() { ExitCode::SUCCESS } else { ExitCode::from(4) })
}

fn cmd_render(a: &RenderArgs) -> Result<ExitCode> {
    let (ds, tax) = open(&a.dataset, &a.taxonomy)?;
    let cfg = &ds.meta.config;
    echo_config(cfg, &[("seq_id", a.seq_id.clone()), ("stride", a.stride.to_string())]);
    let Some(row) = ds.manifest.row(&a.seq_id) else {
        bail!("no sequence {} in {}", a.seq_id, a.dataset.display());
    };
    let record = ds.load_sequence(row)?;
    let object = tax.object(&record.object)?;
    let stage = Stage::new(&cfg.workspace, &record.scene, object);
    let intr = cfg.workspace.intrinsics();
    let offset = cfg.workspace.camera_offset();
    std::fs::create_dir_all(&a.out).with_context(|| a.out.display().to_string())?;
    let mut written = 0;
    for (k, f) in record.frames.iter().enumerate().step_by(a.stride as usize) {
        let frame = render_frame(&stage, &f.pose.compose(&offset), &intr, a.label_parts);
        write_frame_files(&a.out, k, &frame).with_context(|| a.out.display().to_string())?;
        written += 1;
    }
    println!("rendered {written} of {} frames into {}", record.frames.len(), a.out.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_oracle(a: &OracleArgs) -> Result<ExitCode> {
    let (ds, tax) = open(&a.dataset, &a.taxonomy)?;
    echo_config(&ds.meta.config, &[("taxonomy", ds.meta.taxonomy.clone())]);
    let preds = oracle_single_grasp(&ds.manifest, &tax)?;
    preds.write(&a.out)?;
    println!("wrote {} sequences to {}", preds.seq_ids().count(), a.out.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_eval(a: &EvalArgs) -> Result<ExitCode> {
    let (ds, tax) = open(&a.dataset, &a.taxonomy)?;
    echo_config(&ds.meta.config, &[("count_nograsp", a.count_nograsp.to_string())]);
    let trials = if a.oracle {
        vec![oracle_single_grasp(&ds.manifest, &tax)?]
    } else {
        a.predictions.iter().map(|p| PredictionFile::read(p)).collect::<Result<Vec<_>, _>>()?
    };
    let truth = GroundTruth::from_dataset(&ds, &tax)?;
    let report = score(&trials, &truth, a.count_nograsp)?;
    let text = report.to_text();
    print!("{text}");
    if let Some(dir) = &a.report_dir {
        std::fs::create_dir_all(dir).with_context(|| dir.display().to_string())?;
        std::fs::write(dir.join("report.txt"), &text).with_context(|| dir.display().to_string())?;
        std::fs::write(dir.join("curve.csv"), report.curve_csv()).with_context(|| dir.display().to_string())?;
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let matches = Cli::command().get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    let result = match &cli.command {
        Command::Generate(a) => cmd_generate(a, matches.subcommand_matches("generate").expect("generate matches")),
        Command::Validate(a) => cmd_validate(a),
        Command::RenderPreview(a) => cmd_render(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Eval(a) => cmd_eval(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
