//! Command-line front end. Every subcommand reads its inputs, runs one of
//! the library pipelines and writes JSON/JSONL outputs; failures are
//! reported as a JSON object on stderr together with a nonzero exit code.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::coldstart::{self, ColdStartResult, RewardRecord};
use crate::coverage::{self, SamplingParams, DEFAULT_CANDIDATES, DEFAULT_SELECTED};
use crate::error::{Error, Result};
use crate::geom::{self, CameraFrame};
use crate::qagen::{self, QAPair, QaGenConfig, SceneMetadata, TaskType};
use crate::rewards::{self, EditCost, FormatPattern, MraConvention, Prediction, RewardConfig, ScoreReport};
use crate::synth::{self, SyntheticScene, Trajectory};
use crate::{io, SCHEMA_VERSION};

pub const EXIT_OK: i32 = 0;
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_MISMATCH: i32 = 3;

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "VOXCOVER_THREADS";

/// Settings shared by all subcommands. Loaded from an optional JSON file;
/// command-line flags take precedence over it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Candidate frames taken uniformly from the manifest.
    pub n_m: usize,
    /// Frames kept by coverage selection.
    pub n_k: usize,
    pub lambda: f64,
    pub conf_floor: f64,
    pub percentile: f64,
    pub stride: usize,
    pub seed: u64,
    pub thresholds: Vec<f64>,
    pub lambda1: f64,
    pub lambda2: f64,
    pub epsilon: f64,
    pub format: FormatPattern,
    pub mra_convention: MraConvention,
    pub edit_cost: EditCost,
    pub quantile: f64,
    pub qagen: QaGenConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let reward = RewardConfig::default();
        Self {
            n_m: DEFAULT_CANDIDATES,
            n_k: DEFAULT_SELECTED,
            lambda: geom::DEFAULT_LAMBDA,
            conf_floor: geom::DEFAULT_CONF_FLOOR,
            percentile: geom::DEFAULT_PERCENTILE,
            stride: geom::DEFAULT_STRIDE,
            seed: 0,
            thresholds: reward.thresholds,
            lambda1: reward.lambda1,
            lambda2: reward.lambda2,
            epsilon: reward.epsilon,
            format: reward.format,
            mra_convention: reward.mra_convention,
            edit_cost: reward.edit_cost,
            quantile: coldstart::DEFAULT_QUANTILE,
            qagen: QaGenConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            Some(p) => io::read_json(p),
            None => Ok(Self::default()),
        }
    }

    pub fn reward_config(&self) -> RewardConfig {
        RewardConfig {
            lambda1: self.lambda1,
            lambda2: self.lambda2,
            thresholds: self.thresholds.clone(),
            epsilon: self.epsilon,
            format: self.format.clone(),
            mra_convention: self.mra_convention,
            edit_cost: self.edit_cost,
        }
    }

    pub fn sampling_params(&self) -> SamplingParams {
        SamplingParams {
            k: self.n_k,
            lambda: self.lambda,
            conf_floor: self.conf_floor,
            percentile: self.percentile,
            stride: self.stride,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_k == 0 || self.n_k > self.n_m {
            return Err(Error::invalid(format!(
                "n_k = {} must be in 1..=n_m ({})",
                self.n_k, self.n_m
            )));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid("lambda must be positive"));
        }
        if !(0.0..=1.0).contains(&self.conf_floor) {
            return Err(Error::invalid("conf_floor must lie in [0, 1]"));
        }
        if !(0.0..=100.0).contains(&self.percentile) {
            return Err(Error::invalid("percentile must lie in [0, 100]"));
        }
        if self.stride == 0 {
            return Err(Error::invalid("stride must be at least 1"));
        }
        if !(self.quantile > 0.0 && self.quantile < 1.0) {
            return Err(Error::invalid("quantile must lie in (0, 1)"));
        }
        self.reward_config().validate()?;
        self.qagen.validate()
    }
}

#[derive(Debug, Parser)]
#[command(name = "voxcover", version, about = "Space-aware frame selection and spatial-QA tooling")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Select frames that maximize voxel coverage.
    Sample(SampleArgs),
    /// Score predictions against ground-truth QA pairs.
    Score(ScoreArgs),
    /// Generate QA pairs from scene metadata.
    Qagen(QagenArgs),
    /// Build the cold-start set from per-candidate rewards.
    Coldstart(ColdstartArgs),
    /// Render a synthetic depth sequence and its manifest.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Candidate frame count.
    #[arg(long)]
    pub nm: Option<usize>,
    /// Selected frame count.
    #[arg(long)]
    pub nk: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub stride: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also write the filtered points as ASCII PLY.
    #[arg(long)]
    pub export_ply: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_parser = parse_mra_convention)]
    pub mra_convention: Option<MraConvention>,
    #[arg(long, value_parser = parse_edit_cost)]
    pub edit_cost: Option<EditCost>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct QagenArgs {
    #[arg(long)]
    pub scene: PathBuf,
    /// Comma-separated task types; all seven when omitted.
    #[arg(long)]
    pub tasks: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ColdstartArgs {
    #[arg(long)]
    pub records: PathBuf,
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Kept items as JSONL.
    #[arg(long)]
    pub kept: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_parser = parse_trajectory, default_value = "orbit")]
    pub trajectory: Trajectory,
    #[arg(long, default_value_t = 32)]
    pub frames: usize,
    #[arg(long, default_value_t = 64)]
    pub width: usize,
    #[arg(long, default_value_t = 48)]
    pub height: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory for PFMs and manifest.json.
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_snake<T: serde::de::DeserializeOwned>(s: &str) -> std::result::Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

fn parse_mra_convention(s: &str) -> std::result::Result<MraConvention, String> {
    parse_snake(s)
}

fn parse_edit_cost(s: &str) -> std::result::Result<EditCost, String> {
    parse_snake(s)
}

fn parse_trajectory(s: &str) -> std::result::Result<Trajectory, String> {
    parse_snake(s)
}

/// Parses `args` (including the program name), runs the command with the
/// thread cap from the environment and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return EXIT_OK;
            }
            report(&json!({ "kind": "usage", "message": e.kind().to_string(), "detail": e.to_string() }));
            return EXIT_INPUT;
        }
    };
    let threads = match thread_cap() {
        Ok(t) => t,
        Err(e) => return fail(&e),
    };
    match run_command(&cli.command, threads) {
        Ok(()) => EXIT_OK,
        Err(e) => fail(&e),
    }
}

fn thread_cap() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::invalid(format!("{THREADS_ENV} must be a positive integer, got '{v}'"))),
        },
        Err(_) => Ok(None),
    }
}

/// Runs one command inside a dedicated pool of `threads` workers (rayon's
/// default when `None`).
pub fn run_command(command: &Command, threads: Option<usize>) -> Result<()> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::invalid(format!("cannot start thread pool: {e}")))?;
    pool.install(|| match command {
        Command::Sample(a) => cmd_sample(a),
        Command::Score(a) => cmd_score(a),
        Command::Qagen(a) => cmd_qagen(a),
        Command::Coldstart(a) => cmd_coldstart(a),
        Command::Synth(a) => cmd_synth(a),
    })
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::ManifestMismatch { .. } => EXIT_MISMATCH,
        Error::Io { .. } | Error::Format { .. } | Error::Json(_) | Error::InvalidInput(_) | Error::InvalidRecord(_) => {
            EXIT_INPUT
        }
        _ => EXIT_OTHER,
    }
}

/// Machine-readable description of an error.
pub fn error_json(err: &Error) -> serde_json::Value {
    let mut obj = json!({ "kind": err.kind(), "message": err.to_string() });
    match err {
        Error::Io { path, .. } | Error::Format { path, .. } => {
            obj["path"] = json!(path.display().to_string());
        }
        Error::ManifestMismatch {
            missing,
            duplicate,
            unknown,
        } => {
            obj["missing"] = json!(missing);
            obj["duplicate"] = json!(duplicate);
            obj["unknown"] = json!(unknown);
        }
        _ => {}
    }
    obj
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    schema_version: u32,
    error: &'a serde_json::Value,
}

fn report(error: &serde_json::Value) {
    let doc = ErrorReport {
        schema_version: SCHEMA_VERSION,
        error,
    };
    let _ = writeln!(std::io::stderr(), "{}", serde_json::to_string(&doc).unwrap_or_default());
}

fn fail(err: &Error) -> i32 {
    report(&error_json(err));
    exit_code(err)
}

fn say(line: impl AsRef<str>) {
    let _ = writeln!(std::io::stdout(), "{}", line.as_ref());
}

#[derive(Debug, Serialize)]
struct SampleOutput {
    schema_version: u32,
    manifest_frames: usize,
    candidate_ids: Vec<u32>,
    selected_ids: Vec<u32>,
    selected_sorted: Vec<u32>,
    covered_voxels: usize,
    total_voxels: usize,
    per_step_gain: Vec<usize>,
    early_stop: bool,
    delta: f64,
    bounds_min: [f64; 3],
    bounds_max: [f64; 3],
    uniform_ids: Vec<u32>,
    uniform_covered_voxels: usize,
    config: RunConfig,
}

fn load_frames(manifest_path: &Path, entries: &[&io::FrameEntry]) -> Result<Vec<CameraFrame>> {
    use rayon::prelude::*;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    // Collect every outcome first so the reported error is the first in
    // manifest order regardless of scheduling.
    let loaded: Vec<Result<CameraFrame>> = entries.par_iter().map(|e| io::load_frame(e, base)).collect();
    loaded.into_iter().collect()
}

pub fn cmd_sample(args: &SampleArgs) -> Result<()> {
    let mut config = RunConfig::load(args.config.as_deref())?;
    if let Some(v) = args.nm {
        config.n_m = v;
    }
    if let Some(v) = args.nk {
        config.n_k = v;
    }
    if let Some(v) = args.lambda {
        config.lambda = v;
    }
    if let Some(v) = args.stride {
        config.stride = v;
    }
    if let Some(v) = args.seed {
        config.seed = v;
    }
    let manifest = io::read_manifest(&args.manifest)?;
    // Short sequences simply use every frame.
    config.n_m = config.n_m.min(manifest.frames.len());
    config.n_k = config.n_k.min(config.n_m);
    config.validate()?;

    let idx = coverage::uniform_subsample(manifest.frames.len(), config.n_m)?;
    let entries: Vec<&io::FrameEntry> = idx.iter().map(|&i| &manifest.frames[i]).collect();
    let frames = load_frames(&args.manifest, &entries)?;
    let outcome = coverage::select_frames(&frames, &config.sampling_params())?;

    let selection = &outcome.selection;
    let mut selected_sorted = selection.selected_ids.clone();
    selected_sorted.sort_unstable();
    let uniform_ids = coverage::uniform_baseline(&outcome.frame_sets, config.n_k)?;
    let uniform_covered_voxels = coverage::coverage_of(&outcome.frame_sets, &uniform_ids);
    let out = SampleOutput {
        schema_version: SCHEMA_VERSION,
        manifest_frames: manifest.frames.len(),
        candidate_ids: entries.iter().map(|e| e.frame_id).collect(),
        selected_ids: selection.selected_ids.clone(),
        selected_sorted,
        covered_voxels: selection.covered_count,
        total_voxels: outcome.total_voxels,
        per_step_gain: selection.per_step_gain.clone(),
        early_stop: selection.early_stop,
        delta: outcome.delta,
        bounds_min: outcome.bounds.min.coords.into(),
        bounds_max: outcome.bounds.max.coords.into(),
        uniform_ids,
        uniform_covered_voxels,
        config,
    };
    io::write_json(&args.out, &out)?;
    if let Some(ply) = &args.export_ply {
        io::write_ply(ply, &outcome.valid_points, &out.selected_ids)?;
    }
    say(format!(
        "selected {} of {} candidates: {} / {} voxels covered (uniform {}), delta {:.4}{}",
        out.selected_ids.len(),
        out.candidate_ids.len(),
        out.covered_voxels,
        out.total_voxels,
        out.uniform_covered_voxels,
        out.delta,
        if out.early_stop { ", stopped early" } else { "" }
    ));
    Ok(())
}

#[derive(Debug, Serialize)]
struct ScoreOutput<'a> {
    #[serde(flatten)]
    report: &'a ScoreReport,
    config: &'a RunConfig,
}

pub fn cmd_score(args: &ScoreArgs) -> Result<()> {
    let mut config = RunConfig::load(args.config.as_deref())?;
    if let Some(v) = args.mra_convention {
        config.mra_convention = v;
    }
    if let Some(v) = args.edit_cost {
        config.edit_cost = v;
    }
    config.validate()?;
    let predictions: Vec<Prediction> = io::read_jsonl(&args.pred)?;
    let ground_truth: Vec<QAPair> = io::read_jsonl(&args.gt)?;
    let report = rewards::score_benchmark(&predictions, &ground_truth, &config.reward_config())?;
    io::write_json(
        &args.out,
        &ScoreOutput {
            report: &report,
            config: &config,
        },
    )?;
    let width = report.per_task.keys().map(String::len).max().unwrap_or(0).max(7);
    say(format!("{:<width$}  {:>5}  {:>7}", "task", "n", "score"));
    for (task, s) in &report.per_task {
        say(format!("{task:<width$}  {:>5}  {:>7.4}", s.count, s.mean));
    }
    say(format!("{:<width$}  {:>5}  {:>7.4}", "overall", report.items.len(), report.overall));
    Ok(())
}

pub fn cmd_qagen(args: &QagenArgs) -> Result<()> {
    let mut config = RunConfig::load(args.config.as_deref())?;
    if let Some(v) = args.seed {
        config.seed = v;
    }
    config.qagen.validate()?;
    let tasks: BTreeSet<TaskType> = match &args.tasks {
        Some(list) => qagen::parse_task_list(list)?,
        None => TaskType::GENERATED.into_iter().collect(),
    };
    let meta: SceneMetadata = io::read_json(&args.scene)?;
    meta.validate().map_err(|e| Error::format(&args.scene, e.to_string()))?;
    let pairs = qagen::generate_all(&meta, &tasks, config.seed, &config.qagen)?;
    io::write_jsonl(&args.out, &pairs)?;
    let mut counts: std::collections::BTreeMap<&str, usize> = Default::default();
    for p in &pairs {
        *counts.entry(p.task_type.as_str()).or_default() += 1;
    }
    let detail: Vec<String> = counts.iter().map(|(t, n)| format!("{t}={n}")).collect();
    say(format!("{}: {} pairs {}", meta.scene_id, pairs.len(), detail.join(" ")));
    Ok(())
}

#[derive(Debug, Serialize)]
struct ColdstartOutput<'a> {
    #[serde(flatten)]
    result: &'a ColdStartResult,
    config: &'a RunConfig,
}

pub fn cmd_coldstart(args: &ColdstartArgs) -> Result<()> {
    let mut config = RunConfig::load(args.config.as_deref())?;
    if let Some(q) = args.q {
        config.quantile = q;
    }
    if !(config.quantile > 0.0 && config.quantile < 1.0) {
        return Err(Error::invalid(format!("quantile {} outside (0, 1)", config.quantile)));
    }
    let records: Vec<RewardRecord> = io::read_jsonl(&args.records)?;
    let result = coldstart::filter_records(&records, config.quantile)?;
    io::write_json(
        &args.out,
        &ColdstartOutput {
            result: &result,
            config: &config,
        },
    )?;
    if let Some(kept) = &args.kept {
        io::write_jsonl(kept, &result.kept)?;
    }
    for (task, r) in &result.retention {
        say(format!(
            "{task}: kept {}/{} (threshold {:.4})",
            r.kept, r.total, result.thresholds[task]
        ));
    }
    Ok(())
}

pub fn cmd_synth(args: &SynthArgs) -> Result<()> {
    if args.frames == 0 || args.width == 0 || args.height == 0 {
        return Err(Error::invalid("frames, width and height must be positive"));
    }
    let scene = SyntheticScene::procedural(args.seed);
    let frames = synth::render_frames(&scene, args.trajectory, args.frames, args.width, args.height, args.seed)?;
    let manifest = io::write_frames(&args.out, &frames)?;
    say(format!(
        "wrote {} frames to {}",
        manifest.frames.len(),
        args.out.join("manifest.json").display()
    ));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_file_fields_default() {
        let c: RunConfig = serde_json::from_str(r#"{"n_k": 4, "mra_convention": "complement"}"#).unwrap();
        assert_eq!(c.n_k, 4);
        assert_eq!(c.n_m, 128);
        assert_eq!(c.mra_convention, MraConvention::Complement);
        assert!(c.validate().is_ok());
        assert!(serde_json::from_str::<RunConfig>(r#"{"nk": 4}"#).is_err());
    }

    #[test]
    fn config_rejects_nk_above_nm() {
        let c = RunConfig {
            n_m: 4,
            n_k: 5,
            ..RunConfig::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn exit_codes_by_kind() {
        let mismatch = Error::ManifestMismatch {
            missing: vec!["a".into()],
            duplicate: vec![],
            unknown: vec![],
        };
        assert_eq!(exit_code(&mismatch), 3);
        assert_eq!(error_json(&mismatch)["missing"][0], "a");
        let io = Error::io("x.pfm", std::io::Error::from(std::io::ErrorKind::NotFound));
        assert_eq!(exit_code(&io), 2);
        assert_eq!(error_json(&io)["path"], "x.pfm");
        assert_eq!(exit_code(&Error::DegenerateScene), 1);
    }

    #[test]
    fn flag_enums_parse() {
        assert_eq!(parse_edit_cost("indel").unwrap(), EditCost::Indel);
        assert_eq!(parse_trajectory("static_then_pan").unwrap(), Trajectory::StaticThenPan);
        assert!(parse_mra_convention("nope").is_err());
    }
}
