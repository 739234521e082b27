use crate::evalkit::{ApInterpolation, OksConstants};
use crate::heatmap::DEFAULT_SIGMA;
use crate::losses::AWingParams;
use crate::posemodel::{DecoderConfig, EncoderConfig, ModelConfig, TeacherConfig};
use crate::synthtug::SynthConfig;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

/// What the student's heatmap branch regresses onto.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum HeatmapTarget {
    /// The frozen teacher's heatmap on the paired RGB crop.
    #[default]
    Teacher,
    /// Gaussian targets rendered from annotations.
    Gt,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlateauConfig {
    pub factor: f64,
    pub patience: usize,
    pub min_lr: f64,
    pub min_delta: f64,
}

impl Default for PlateauConfig {
    fn default() -> Self {
        Self { factor: 0.1, patience: 10, min_lr: 1e-6, min_delta: 1e-4 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EarlyStopConfig {
    pub patience: usize,
    pub min_delta: f64,
}

impl Default for EarlyStopConfig {
    fn default() -> Self {
        Self { patience: 25, min_delta: 1e-4 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub plateau: PlateauConfig,
    pub early_stop: EarlyStopConfig,
    /// Keep every n-th frame of each trial.
    pub frame_stride: usize,
}

/// Desk-scale recipe: sized to finish on one CPU core.
impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            batch_size: 8,
            max_epochs: 20,
            plateau: PlateauConfig::default(),
            early_stop: EarlyStopConfig::default(),
            frame_stride: 4,
        }
    }
}

impl TrainConfig {
    /// Long schedule: lr 0.01, batch 50, up to 500 epochs, all frames.
    pub fn long_schedule() -> Self {
        Self { lr: 0.01, batch_size: 50, max_epochs: 500, frame_stride: 1, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(format!("lr must be positive, got {}", self.lr));
        }
        if self.batch_size == 0 || self.frame_stride == 0 {
            return Err("batch_size and frame_stride must be at least 1".into());
        }
        if !(self.plateau.factor > 0.0 && self.plateau.factor < 1.0) || self.plateau.patience == 0 {
            return Err("plateau factor must lie in (0, 1) with patience ≥ 1".into());
        }
        if self.early_stop.patience == 0 {
            return Err("early-stop patience must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub oks: OksConstants,
    pub interpolation: ApInterpolation,
}

/// Everything a command needs; written next to the outputs as
/// `resolved_config.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub dataset: PathBuf,
    pub out: PathBuf,
    pub synth: SynthConfig,
    pub teacher: TeacherConfig,
    pub student: EncoderConfig,
    pub decoder: DecoderConfig,
    pub awing: AWingParams,
    pub beta: f64,
    pub heatmap_target: HeatmapTarget,
    pub sigma: f64,
    pub held_out_subject: u32,
    pub teacher_train: TrainConfig,
    pub student_train: TrainConfig,
    pub eval: EvalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            dataset: PathBuf::from("data"),
            out: PathBuf::from("out"),
            synth: SynthConfig::default(),
            teacher: TeacherConfig::default(),
            student: EncoderConfig::default(),
            decoder: DecoderConfig::default(),
            awing: AWingParams::default(),
            beta: 0.4,
            heatmap_target: HeatmapTarget::Teacher,
            sigma: DEFAULT_SIGMA,
            held_out_subject: 0,
            teacher_train: TrainConfig::default(),
            student_train: TrainConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn teacher_model(&self) -> ModelConfig {
        ModelConfig::teacher(self.teacher.clone(), self.decoder.clone())
    }

    pub fn student_model(&self) -> ModelConfig {
        ModelConfig::student(self.student.clone(), self.decoder.clone())
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(format!("beta must lie in [0, 1], got {}", self.beta));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(format!("sigma must be positive, got {}", self.sigma));
        }
        self.awing.validate().map_err(|e| e.to_string())?;
        self.teacher_train.validate()?;
        self.student_train.validate()?;
        self.teacher_model().validate().map_err(|e| e.to_string())?;
        self.student_model().validate().map_err(|e| e.to_string())?;
        Ok(())
    }
}
