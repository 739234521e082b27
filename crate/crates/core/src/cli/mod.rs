//! Command-line workflow: dataset generation, teacher training, distillation,
//! evaluation, β-sweeps, leave-one-subject-out runs and annotation.
//!
//! Every `cmd_*` function is callable directly; [`main`] wires them to clap.

pub mod annotate;
pub mod config;
pub mod train;

pub use config::{EarlyStopConfig, EvalConfig, HeatmapTarget, PlateauConfig, RunConfig, TrainConfig};
pub use train::{build_samples, split_frames, EpochLog, LossParts, Objective, ResumeState, Sample, TrainError, TrainOutcome, Trainer};

use crate::evalkit::{evaluate_pipeline, loso_folds, EvalError, FoldMetrics, FoldSpec, MetricsReport, ModelPredictor, OraclePredictor, Predictor};
use crate::losses::CompositeWeights;
use crate::posemodel::{load_checkpoint, load_checkpoint_expecting, save_checkpoint, CheckpointMeta, EncoderSpec, ModelConfig, ModelError, PoseModel};
use crate::preproc::{Modality, PreprocError};
use crate::synthtug::{generate_dataset, mix_seed, read_dataset, write_dataset, DataError, Dataset, DatasetManifest};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

const TEACHER_INIT: u64 = 0x7EAC_4E12;
const STUDENT_INIT: u64 = 0x57DE_2700;
const TEACHER_ORDER: u64 = 0x7EAC_0D3;
const STUDENT_ORDER: u64 = 0x57DE_0D3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("training diverged: {0}")]
    Divergence(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Divergence(_) => 4,
            CliError::Io { .. } => 1,
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Config(_) | ModelError::Dimension(_) => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Divergence { .. } => CliError::Divergence(e.to_string()),
            TrainError::NoData => CliError::Data(e.to_string()),
            TrainError::Model(m) => m.into(),
            TrainError::Numerics(n) => CliError::Config(n.to_string()),
        }
    }
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

/// Creates `dir`, refusing a non-empty existing directory unless `force`.
pub fn prepare_out_dir(dir: &Path, force: bool) -> Result<(), CliError> {
    if let Ok(mut entries) = fs::read_dir(dir) {
        if entries.next().is_some() && !force {
            return Err(CliError::Config(format!("{} exists and is not empty; pass --force to overwrite", dir.display())));
        }
    } else if dir.exists() {
        return Err(CliError::Config(format!("{} exists and is not a directory", dir.display())));
    }
    fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    write(path, serde_json::to_string_pretty(value).map_err(|e| CliError::Config(e.to_string()))? + "\n")
}

fn write_resolved(cfg: &RunConfig, dir: &Path) -> Result<(), CliError> {
    write_json(&dir.join("resolved_config.json"), cfg)
}

fn validated(cfg: &RunConfig) -> Result<(), CliError> {
    cfg.validate().map_err(CliError::Config)
}

fn fold_for(manifest: &DatasetManifest, held_out: u32) -> Result<FoldSpec, CliError> {
    loso_folds(manifest)?
        .into_iter()
        .find(|f| f.held_out_subject == held_out)
        .ok_or_else(|| CliError::Config(format!("subject {held_out} is not in the dataset")))
}

fn modality_of(config: &ModelConfig) -> Modality {
    match config.encoder {
        EncoderSpec::Teacher(_) => Modality::Rgb,
        EncoderSpec::Student(_) => Modality::Thermal,
    }
}

/// Scores `model` on the held-out subject of `fold`.
pub fn evaluate_model(model: &PoseModel, dataset: &Dataset, fold: &FoldSpec, eval: &EvalConfig) -> Result<FoldMetrics, CliError> {
    let predictor = ModelPredictor::new(model, modality_of(&model.config), dataset.manifest.config.camera);
    Ok(evaluate_pipeline(&predictor, dataset, fold, &eval.oks, eval.interpolation)?.0)
}

fn log_epoch(tag: &str) -> impl FnMut(&EpochLog) + '_ {
    move |l: &EpochLog| {
        let val = l.val.map(|v| format!(" val {:.6}", v.total)).unwrap_or_default();
        eprintln!("[{tag}] epoch {:>3} lr {:.1e} train {:.6}{val}", l.epoch, l.lr, l.train.total);
    }
}

fn checkpoint_meta(outcome: &TrainOutcome, seed: u64, role: &str) -> CheckpointMeta {
    let mut extra = serde_json::Map::new();
    extra.insert("role".into(), role.into());
    extra.insert("best_epoch".into(), outcome.best_epoch.into());
    extra.insert("resume".into(), serde_json::to_value(&outcome.state).unwrap());
    CheckpointMeta {
        epoch: outcome.state.epoch,
        best_metric: Some(outcome.best_metric).filter(|m| m.is_finite()),
        seed,
        extra,
    }
}

fn resume_state(meta: &CheckpointMeta, path: &Path) -> Result<ResumeState, CliError> {
    let v = meta.extra.get("resume").ok_or_else(|| CliError::Data(format!("{}: no resume state", path.display())))?;
    serde_json::from_value(v.clone()).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// Result of one training command.
#[derive(Clone, Debug)]
pub struct TrainRun {
    pub checkpoint: PathBuf,
    pub model: PoseModel,
    pub outcome: TrainOutcome,
    pub metrics: FoldMetrics,
    pub train_samples: usize,
    pub val_samples: usize,
}

fn finish_run(
    cfg: &RunConfig,
    dir: &Path,
    name: &str,
    model: PoseModel,
    outcome: TrainOutcome,
    dataset: &Dataset,
    fold: &FoldSpec,
    counts: (usize, usize),
) -> Result<TrainRun, CliError> {
    let checkpoint = dir.join(format!("{name}.tpck"));
    save_checkpoint(&model, &checkpoint_meta(&outcome, cfg.seed, name), &checkpoint)?;
    write(&dir.join("losses.csv"), train::losses_csv(&outcome.logs))?;
    let metrics = evaluate_model(&model, dataset, fold, &cfg.eval)?;
    let report = MetricsReport::new(vec![metrics.clone()], vec![fold.clone()]);
    write(&dir.join("metrics.json"), report.to_json() + "\n")?;
    write(&dir.join("metrics.csv"), report.to_csv())?;
    Ok(TrainRun { checkpoint, model, outcome, metrics, train_samples: counts.0, val_samples: counts.1 })
}

/// Writes a synthetic dataset to `cfg.out`.
pub fn cmd_gen_data(cfg: &RunConfig, force: bool) -> Result<DatasetManifest, CliError> {
    let mut synth = cfg.synth.clone();
    synth.seed = cfg.seed;
    if synth.subjects == 0 || synth.trials == 0 {
        return Err(CliError::Config("subjects and trials must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&synth.drop_fraction) {
        return Err(CliError::Config(format!("drop_fraction must lie in [0, 1], got {}", synth.drop_fraction)));
    }
    prepare_out_dir(&cfg.out, force)?;
    let data = generate_dataset(&synth);
    write_dataset(&data.frames, &data.manifest, &cfg.out)?;
    let resolved = RunConfig { synth, dataset: cfg.out.clone(), ..cfg.clone() };
    write_resolved(&resolved, &cfg.out)?;
    Ok(data.manifest)
}

/// Trains a teacher on the training subjects of `dataset` with
/// `cfg.held_out_subject` excluded, writing into `dir`.
pub fn train_teacher_on(cfg: &RunConfig, dataset: &Dataset, dir: &Path, resume: Option<&Path>) -> Result<TrainRun, CliError> {
    let fold = fold_for(&dataset.manifest, cfg.held_out_subject)?;
    let (mut model, state) = match resume {
        Some(p) => {
            let ck = load_checkpoint_expecting(p, &cfg.teacher_model())?;
            let state = resume_state(&ck.meta, p)?;
            (ck.model, Some(state))
        }
        None => (PoseModel::new(cfg.teacher_model(), mix_seed(cfg.seed, TEACHER_INIT))?, None),
    };
    let tc = &cfg.teacher_train;
    let (train_f, val_f) = split_frames(dataset, &fold.train_subjects, tc.frame_stride);
    let camera = dataset.manifest.config.camera;
    let train_s = build_samples(&train_f, &camera, Modality::Rgb, None)?;
    let val_s = build_samples(&val_f, &camera, Modality::Rgb, None)?;
    let trainer = Trainer { objective: Objective::Supervised, config: tc, awing: cfg.awing, sigma: cfg.sigma, seed: mix_seed(cfg.seed, TEACHER_ORDER) };
    let state = state.unwrap_or_else(|| trainer.fresh_state());
    let outcome = trainer.fit(&mut model, &train_s, &val_s, state, log_epoch("teacher"))?;
    finish_run(cfg, dir, "teacher", model, outcome, dataset, &fold, (train_s.len(), val_s.len()))
}

pub fn cmd_train_teacher(cfg: &RunConfig, resume: Option<&Path>, force: bool) -> Result<TrainRun, CliError> {
    validated(cfg)?;
    let dataset = read_dataset(&cfg.dataset)?;
    prepare_out_dir(&cfg.out, force)?;
    write_resolved(cfg, &cfg.out)?;
    train_teacher_on(cfg, &dataset, &cfg.out, resume)
}

/// Loads a teacher checkpoint and freezes every parameter.
pub fn load_teacher(path: &Path, cfg: &RunConfig) -> Result<PoseModel, CliError> {
    let ck = load_checkpoint(path)?;
    let mut teacher = ck.model;
    if !matches!(teacher.config.encoder, EncoderSpec::Teacher(_)) {
        return Err(CliError::Config(format!("{} is not a teacher checkpoint", path.display())));
    }
    if teacher.config.encoder.latent_channels() != cfg.student.latent_channels {
        return Err(CliError::Config(format!(
            "teacher latent has {} channels but the student produces {}",
            teacher.config.encoder.latent_channels(),
            cfg.student.latent_channels
        )));
    }
    if teacher.config.decoder != cfg.decoder {
        return Err(CliError::Config("teacher decoder config differs from the run config".into()));
    }
    teacher.freeze_all();
    Ok(teacher)
}

/// Distillation samples of the non-held-out subjects, with cached teacher
/// outputs. Shared across β values and resumed runs.
pub fn distill_samples(cfg: &RunConfig, dataset: &Dataset, teacher: &PoseModel) -> Result<(FoldSpec, Vec<Sample>, Vec<Sample>), CliError> {
    let fold = fold_for(&dataset.manifest, cfg.held_out_subject)?;
    let (train_f, val_f) = split_frames(dataset, &fold.train_subjects, cfg.student_train.frame_stride);
    let camera = dataset.manifest.config.camera;
    let train_s = build_samples(&train_f, &camera, Modality::Thermal, Some(teacher))?;
    let val_s = build_samples(&val_f, &camera, Modality::Thermal, Some(teacher))?;
    Ok((fold, train_s, val_s))
}

/// Distills a student from `teacher` on prepared samples, writing into `dir`.
pub fn distill_on(
    cfg: &RunConfig,
    dataset: &Dataset,
    teacher: &PoseModel,
    samples: &(FoldSpec, Vec<Sample>, Vec<Sample>),
    dir: &Path,
    resume: Option<&Path>,
) -> Result<TrainRun, CliError> {
    let weights = CompositeWeights::new(cfg.beta).map_err(|e| CliError::Config(e.to_string()))?;
    let (fold, train_s, val_s) = samples;
    let (mut student, state) = match resume {
        Some(p) => {
            let ck = load_checkpoint_expecting(p, &cfg.student_model())?;
            let state = resume_state(&ck.meta, p)?;
            (ck.model, Some(state))
        }
        None => (PoseModel::new(cfg.student_model(), mix_seed(cfg.seed, STUDENT_INIT))?, None),
    };
    student.copy_decoder_from(teacher)?;
    student.freeze_decoder();
    let trainer = Trainer {
        objective: Objective::Distill { weights, target: cfg.heatmap_target },
        config: &cfg.student_train,
        awing: cfg.awing,
        sigma: cfg.sigma,
        seed: mix_seed(cfg.seed, STUDENT_ORDER),
    };
    let state = state.unwrap_or_else(|| trainer.fresh_state());
    let outcome = trainer.fit(&mut student, train_s, val_s, state, log_epoch("student"))?;
    finish_run(cfg, dir, "student", student, outcome, dataset, fold, (train_s.len(), val_s.len()))
}

pub fn cmd_distill(cfg: &RunConfig, teacher: &Path, resume: Option<&Path>, force: bool) -> Result<TrainRun, CliError> {
    validated(cfg)?;
    let teacher = load_teacher(teacher, cfg)?;
    let dataset = read_dataset(&cfg.dataset)?;
    prepare_out_dir(&cfg.out, force)?;
    write_resolved(cfg, &cfg.out)?;
    let samples = distill_samples(cfg, &dataset, &teacher)?;
    distill_on(cfg, &dataset, &teacher, &samples, &cfg.out, resume)
}

/// What produces the keypoints being scored or drawn.
#[derive(Clone, Debug)]
pub enum Source {
    Checkpoint(PathBuf),
    /// Ground truth passed through as predictions.
    Oracle,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FoldSelection {
    All,
    Subject(u32),
}

impl std::str::FromStr for FoldSelection {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if s == "all" {
            return Ok(FoldSelection::All);
        }
        s.parse().map(FoldSelection::Subject).map_err(|_| format!("expected `all` or a subject id, got `{s}`"))
    }
}

fn with_predictor<T>(source: &Source, camera: crate::synthtug::CameraConfig, f: impl FnOnce(&dyn Predictor) -> Result<T, CliError>) -> Result<T, CliError> {
    match source {
        Source::Oracle => f(&OraclePredictor::default()),
        Source::Checkpoint(p) => {
            if !p.is_file() {
                return Err(CliError::Data(format!("checkpoint {} not found", p.display())));
            }
            let model = load_checkpoint(p)?.model;
            f(&ModelPredictor::new(&model, modality_of(&model.config), camera))
        }
    }
}

/// Scores `source` on the selected held-out subjects and writes
/// `metrics.json` and `metrics.csv`.
pub fn cmd_evaluate(cfg: &RunConfig, source: &Source, folds: FoldSelection, force: bool) -> Result<MetricsReport, CliError> {
    let dataset = read_dataset(&cfg.dataset)?;
    let specs: Vec<FoldSpec> = match folds {
        FoldSelection::All => loso_folds(&dataset.manifest)?,
        FoldSelection::Subject(s) => vec![fold_for(&dataset.manifest, s)?],
    };
    let metrics = with_predictor(source, dataset.manifest.config.camera, |p| {
        specs
            .iter()
            .map(|fold| Ok(evaluate_pipeline(p, &dataset, fold, &cfg.eval.oks, cfg.eval.interpolation)?.0))
            .collect::<Result<Vec<_>, CliError>>()
    })?;
    let report = MetricsReport::new(metrics, specs);
    prepare_out_dir(&cfg.out, force)?;
    write_resolved(cfg, &cfg.out)?;
    write(&cfg.out.join("metrics.json"), report.to_json() + "\n")?;
    write(&cfg.out.join("metrics.csv"), report.to_csv())?;
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub beta: f64,
    pub ap: f64,
    pub ap50: f64,
    pub ap75: f64,
}

pub fn default_betas() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}

fn beta_dir(beta: f64) -> String {
    format!("beta_{beta:.2}")
}

/// Distills one student per β from the same teacher, seed and samples, and
/// writes `beta_sweep.csv`.
pub fn cmd_beta_sweep(cfg: &RunConfig, teacher: &Path, betas: &[f64], force: bool) -> Result<Vec<SweepRow>, CliError> {
    validated(cfg)?;
    if betas.is_empty() {
        return Err(CliError::Config("beta grid is empty".into()));
    }
    for &b in betas {
        CompositeWeights::new(b).map_err(|e| CliError::Config(e.to_string()))?;
    }
    let teacher = load_teacher(teacher, cfg)?;
    let dataset = read_dataset(&cfg.dataset)?;
    prepare_out_dir(&cfg.out, force)?;
    write_resolved(cfg, &cfg.out)?;
    let samples = distill_samples(cfg, &dataset, &teacher)?;
    let mut rows = Vec::new();
    let mut csv = String::from("beta,AP,AP50,AP75\n");
    for &beta in betas {
        let run_cfg = RunConfig { beta, ..cfg.clone() };
        let dir = cfg.out.join(beta_dir(beta));
        prepare_out_dir(&dir, true)?;
        let t0 = Instant::now();
        let run = distill_on(&run_cfg, &dataset, &teacher, &samples, &dir, None)?;
        eprintln!("[sweep] beta {beta:.2}: AP {:.4} AP50 {:.4} ({:.0} s)", run.metrics.ap, run.metrics.ap50, t0.elapsed().as_secs_f64());
        let m = &run.metrics;
        csv.push_str(&format!("{beta},{},{},{}\n", m.ap, m.ap50, m.ap75));
        rows.push(SweepRow { beta, ap: m.ap, ap50: m.ap50, ap75: m.ap75 });
    }
    write(&cfg.out.join("beta_sweep.csv"), csv)?;
    Ok(rows)
}

/// Per fold: train a teacher without the held-out subject (or reuse
/// `teacher`), distill a student, and score it. Writes the cross-fold report.
pub fn cmd_loso(cfg: &RunConfig, teacher: Option<&Path>, force: bool) -> Result<MetricsReport, CliError> {
    validated(cfg)?;
    let dataset = read_dataset(&cfg.dataset)?;
    let specs = loso_folds(&dataset.manifest)?;
    let shared = teacher.map(|p| load_teacher(p, cfg)).transpose()?;
    prepare_out_dir(&cfg.out, force)?;
    write_resolved(cfg, &cfg.out)?;
    let mut folds = Vec::new();
    for spec in &specs {
        let fold_cfg = RunConfig { held_out_subject: spec.held_out_subject, ..cfg.clone() };
        let dir = cfg.out.join(format!("fold_{}", spec.held_out_subject));
        prepare_out_dir(&dir, true)?;
        let teacher = match &shared {
            Some(t) => t.clone(),
            None => {
                let tdir = dir.join("teacher");
                prepare_out_dir(&tdir, true)?;
                let mut t = train_teacher_on(&fold_cfg, &dataset, &tdir, None)?.model;
                t.freeze_all();
                t
            }
        };
        let samples = distill_samples(&fold_cfg, &dataset, &teacher)?;
        let run = distill_on(&fold_cfg, &dataset, &teacher, &samples, &dir, None)?;
        eprintln!("[loso] subject {}: AP {:.4} AP50 {:.4}", spec.held_out_subject, run.metrics.ap, run.metrics.ap50);
        folds.push(run.metrics);
    }
    let report = MetricsReport::new(folds, specs);
    write(&cfg.out.join("metrics.json"), report.to_json() + "\n")?;
    write(&cfg.out.join("metrics.csv"), report.to_csv())?;
    Ok(report)
}

/// Parses `S:T:F` frame keys.
pub fn parse_frame_key(s: &str) -> Result<(u32, u32, u32), String> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || format!("expected SUBJECT:TRIAL:FRAME, got `{s}`");
    if parts.len() != 3 {
        return Err(bad());
    }
    let n = |i: usize| parts[i].parse::<u32>().map_err(|_| bad());
    Ok((n(0)?, n(1)?, n(2)?))
}

/// Renders one overlay PPM per requested frame into `cfg.out`.
pub fn cmd_annotate(cfg: &RunConfig, source: &Source, frames: &[(u32, u32, u32)], force: bool) -> Result<Vec<PathBuf>, CliError> {
    let dataset = read_dataset(&cfg.dataset)?;
    let selected = frames
        .iter()
        .map(|&(s, t, f)| dataset.find(s, t, f).ok_or_else(|| CliError::Data(format!("frame {s}:{t}:{f} not found"))))
        .collect::<Result<Vec<_>, _>>()?;
    prepare_out_dir(&cfg.out, force)?;
    write_resolved(cfg, &cfg.out)?;
    with_predictor(source, dataset.manifest.config.camera, |p| {
        let mut written = Vec::new();
        for frame in &selected {
            let pred = match p.predict(frame) {
                Ok(pred) => Some(pred),
                Err(PreprocError::NoPersonDetected) => None,
                Err(e) => return Err(CliError::Data(e.to_string())),
            };
            let img = annotate::render_annotation(frame, pred.as_ref());
            let path = cfg.out.join(format!("s{}_t{}_f{}_annotated.ppm", frame.subject_id, frame.trial_id, frame.frame_index));
            write(&path, crate::synthtug::pnm::encode_ppm8(annotate::OUT_W, annotate::OUT_H, &img))?;
            written.push(path);
        }
        Ok(written)
    })
}

#[derive(Parser, Debug)]
#[command(name = "thermopose", version, about = "Thermal keypoint distillation toolkit")]
pub struct Cli {
    /// Seed for data generation, initialization and batch order.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Allow writing into a non-empty output directory.
    #[arg(long, global = true)]
    pub force: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Default)]
pub struct TrainFlags {
    /// Dataset directory.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Subject excluded from training and used for scoring.
    #[arg(long)]
    pub held_out: Option<u32>,
    /// Epoch cap.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Initial Adam learning rate.
    #[arg(long)]
    pub lr: Option<f64>,
    /// Mini-batch size.
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Keep every n-th frame of each trial.
    #[arg(long)]
    pub frame_stride: Option<usize>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic paired thermal/RGB dataset.
    GenData {
        /// Number of subjects.
        #[arg(long)]
        subjects: Option<u32>,
        /// Trials per subject.
        #[arg(long)]
        trials: Option<u32>,
        /// Fraction of frames flagged as dropped.
        #[arg(long)]
        drop_fraction: Option<f64>,
    },
    /// Train the teacher on RGB crops.
    TrainTeacher {
        #[command(flatten)]
        train: TrainFlags,
        /// Continue from a checkpoint written by this command.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Distill a thermal student from a frozen teacher.
    Distill {
        #[command(flatten)]
        train: TrainFlags,
        /// Teacher checkpoint.
        #[arg(long)]
        teacher: PathBuf,
        /// Weight of the latent loss, in [0, 1].
        #[arg(long, allow_negative_numbers = true)]
        beta: Option<f64>,
        /// Source of heatmap targets.
        #[arg(long, value_enum)]
        heatmap_target: Option<HeatmapTarget>,
        /// Continue from a checkpoint written by this command.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Score a checkpoint (or ground-truth oracle) on held-out subjects.
    Evaluate {
        /// Dataset directory.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Student or teacher checkpoint.
        #[arg(long, required_unless_present = "oracle")]
        checkpoint: Option<PathBuf>,
        /// Use ground truth as predictions.
        #[arg(long, conflicts_with = "checkpoint")]
        oracle: bool,
        /// `all` or a subject id.
        #[arg(long, default_value = "all")]
        folds: FoldSelection,
    },
    /// Distill and score one student per β.
    BetaSweep {
        #[command(flatten)]
        train: TrainFlags,
        /// Teacher checkpoint.
        #[arg(long)]
        teacher: PathBuf,
        /// Comma-separated grid; defaults to 0.0, 0.1, …, 1.0.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        betas: Option<Vec<f64>>,
    },
    /// Leave-one-subject-out distillation and scoring.
    Loso {
        #[command(flatten)]
        train: TrainFlags,
        /// Reuse one teacher for every fold instead of training one per fold.
        #[arg(long)]
        teacher: Option<PathBuf>,
    },
    /// Draw predicted keypoints over thermal frames.
    Annotate {
        /// Dataset directory.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Student or teacher checkpoint.
        #[arg(long, required_unless_present = "oracle")]
        checkpoint: Option<PathBuf>,
        /// Use ground truth as predictions.
        #[arg(long, conflicts_with = "checkpoint")]
        oracle: bool,
        /// Frames as SUBJECT:TRIAL:FRAME.
        #[arg(long = "frame", required = true, value_parser = parse_frame_key)]
        frames: Vec<(u32, u32, u32)>,
    },
}

/// Base config from `--config`, then global flag overrides.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => {
            let bytes = fs::read(p).map_err(|source| CliError::Io { path: p.clone(), source })?;
            serde_json::from_slice(&bytes).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
        }
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    Ok(cfg)
}

fn apply_train_flags(cfg: &mut RunConfig, f: &TrainFlags, teacher: bool, student: bool) {
    if let Some(d) = &f.data {
        cfg.dataset = d.clone();
    }
    if let Some(h) = f.held_out {
        cfg.held_out_subject = h;
    }
    let mut targets = Vec::new();
    if teacher {
        targets.push(&mut cfg.teacher_train);
    }
    if student {
        targets.push(&mut cfg.student_train);
    }
    for t in targets {
        if let Some(e) = f.epochs {
            t.max_epochs = e;
        }
        if let Some(lr) = f.lr {
            t.lr = lr;
        }
        if let Some(b) = f.batch_size {
            t.batch_size = b;
        }
        if let Some(s) = f.frame_stride {
            t.frame_stride = s;
        }
    }
}

fn set_data(cfg: &mut RunConfig, data: &Option<PathBuf>) {
    if let Some(d) = data {
        cfg.dataset = d.clone();
    }
}

fn source(checkpoint: &Option<PathBuf>) -> Source {
    checkpoint.clone().map(Source::Checkpoint).unwrap_or(Source::Oracle)
}

/// Runs a parsed command line.
pub fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = resolve_config(&cli)?;
    let force = cli.force;
    let started = Instant::now();
    match &cli.command {
        Command::GenData { subjects, trials, drop_fraction } => {
            cfg.synth.subjects = subjects.unwrap_or(cfg.synth.subjects);
            cfg.synth.trials = trials.unwrap_or(cfg.synth.trials);
            cfg.synth.drop_fraction = drop_fraction.unwrap_or(cfg.synth.drop_fraction);
            let m = cmd_gen_data(&cfg, force)?;
            eprintln!("wrote {} subjects, {} trials to {}", m.subjects.len(), m.trials.len(), cfg.out.display());
        }
        Command::TrainTeacher { train, resume } => {
            apply_train_flags(&mut cfg, train, true, false);
            let r = cmd_train_teacher(&cfg, resume.as_deref(), force)?;
            eprintln!("teacher: AP {:.4} AP50 {:.4} on subject {}", r.metrics.ap, r.metrics.ap50, cfg.held_out_subject);
        }
        Command::Distill { train, teacher, beta, heatmap_target, resume } => {
            apply_train_flags(&mut cfg, train, false, true);
            cfg.beta = beta.unwrap_or(cfg.beta);
            cfg.heatmap_target = heatmap_target.unwrap_or(cfg.heatmap_target);
            let r = cmd_distill(&cfg, teacher, resume.as_deref(), force)?;
            eprintln!("student: AP {:.4} AP50 {:.4} on subject {}", r.metrics.ap, r.metrics.ap50, cfg.held_out_subject);
        }
        Command::Evaluate { data, checkpoint, folds, .. } => {
            set_data(&mut cfg, data);
            let r = cmd_evaluate(&cfg, &source(checkpoint), *folds, force)?;
            for (k, v) in &r.summary.formatted {
                eprintln!("{k}: {v}");
            }
        }
        Command::BetaSweep { train, teacher, betas } => {
            apply_train_flags(&mut cfg, train, false, true);
            let betas = betas.clone().unwrap_or_else(default_betas);
            cmd_beta_sweep(&cfg, teacher, &betas, force)?;
        }
        Command::Loso { train, teacher } => {
            apply_train_flags(&mut cfg, train, teacher.is_none(), true);
            let r = cmd_loso(&cfg, teacher.as_deref(), force)?;
            for (k, v) in &r.summary.formatted {
                eprintln!("{k}: {v}");
            }
        }
        Command::Annotate { data, checkpoint, frames, .. } => {
            set_data(&mut cfg, data);
            let paths = cmd_annotate(&cfg, &source(checkpoint), frames, force)?;
            eprintln!("wrote {} annotated frames", paths.len());
        }
    }
    eprintln!("done in {:.1} s", started.elapsed().as_secs_f64());
    Ok(())
}

/// Process entry point: parses `std::env::args`, runs, maps errors to exit codes.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
