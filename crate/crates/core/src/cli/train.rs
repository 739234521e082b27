//! Teacher training and student distillation loops.

use super::config::{HeatmapTarget, TrainConfig};
use crate::heatmap::encode;
use crate::keypoints::{CoordFrame, KeypointSet};
use crate::losses::{awing, composite, composite_value, latent_l1, AWingParams, CompositeWeights};
use crate::numerics::{AdamState, EarlyStopState, Graph, NumericsError, PlateauState, Tensor};
use crate::posemodel::{ModelError, PoseModel};
use crate::preproc::{detect_person, prepare_with, transform_keypoints, DetectorConfig, Direction, Modality};
use crate::synthtug::{mix_seed, CameraConfig, Dataset, Frame, THERMAL_H, THERMAL_W};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("training diverged at epoch {epoch}: {reason}")]
    Divergence { epoch: usize, reason: String },
    #[error("no usable training frames")]
    NoData,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// One preprocessed frame. Inputs and teacher outputs are stored as `f32`
/// to halve the cache footprint.
#[derive(Clone, Debug)]
pub struct Sample {
    pub subject_id: u32,
    pub trial_id: u32,
    pub frame_index: u32,
    pub input: Vec<f32>,
    /// Annotations in crop coordinates; points outside the crop are invisible.
    pub keypoints: KeypointSet,
    pub teacher: Option<TeacherTargets>,
}

#[derive(Clone, Debug)]
pub struct TeacherTargets {
    pub latent: Vec<f32>,
    /// Clamped to `[0, 1]`.
    pub heatmap: Vec<f32>,
}

/// Training frames of `subjects` split into train and validation sets. The
/// highest-numbered trial of each subject is held out for validation when
/// the subject has more than one trial.
pub fn split_frames<'a>(dataset: &'a Dataset, subjects: &[u32], frame_stride: usize) -> (Vec<&'a Frame>, Vec<&'a Frame>) {
    let mut train = Vec::new();
    let mut val = Vec::new();
    for &s in subjects {
        let trials: Vec<u32> = dataset.manifest.trials.iter().filter(|t| t.subject_id == s).map(|t| t.trial_id).collect();
        let val_trial = trials.iter().max().copied().filter(|_| trials.len() > 1);
        for f in dataset.frames_of(s).filter(|f| !f.dropped && f.frame_index as usize % frame_stride == 0) {
            if Some(f.trial_id) == val_trial {
                val.push(f);
            } else {
                train.push(f);
            }
        }
    }
    (train, val)
}

fn to_f32(v: &[f64]) -> Vec<f32> {
    v.iter().map(|&x| x as f32).collect()
}

fn to_f64(v: &[f32]) -> Vec<f64> {
    v.iter().map(|&x| x as f64).collect()
}

/// Detects, crops and annotates each frame, dropping frames with no
/// detection or no visible keypoint inside the crop. With a `teacher`, the
/// paired RGB crop is run through it and the outputs cached.
pub fn build_samples(
    frames: &[&Frame],
    camera: &CameraConfig,
    modality: Modality,
    teacher: Option<&PoseModel>,
) -> Result<Vec<Sample>, TrainError> {
    let det_cfg = DetectorConfig::default();
    let mut out = Vec::with_capacity(frames.len());
    for f in frames {
        let Ok(det) = detect_person(&f.thermal_f64(), THERMAL_W, THERMAL_H, &det_cfg) else { continue };
        let Ok(prep) = prepare_with(f, camera, modality, det.clone()) else { continue };
        let keypoints = transform_keypoints(&f.gt_keypoints, &prep.transform, Direction::ToCrop, CoordFrame::Thermal);
        if keypoints.visible_count() == 0 {
            continue;
        }
        let teacher = match teacher {
            Some(t) => {
                let rgb = if modality == Modality::Rgb { prep.input.clone() } else { prepare_with(f, camera, Modality::Rgb, det).map_err(|e| ModelError::Config(e.to_string()))?.input };
                let inf = t.infer(&rgb)?;
                Some(TeacherTargets {
                    latent: to_f32(&inf.latent),
                    heatmap: inf.heatmap.iter().map(|&v| v.clamp(0.0, 1.0) as f32).collect(),
                })
            }
            None => None,
        };
        out.push(Sample {
            subject_id: f.subject_id,
            trial_id: f.trial_id,
            frame_index: f.frame_index,
            input: to_f32(&prep.input),
            keypoints,
            teacher,
        });
    }
    Ok(out)
}

/// Loss being minimized.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Objective {
    /// AWing against Gaussian targets rendered from annotations.
    Supervised,
    /// Composite latent-L1 plus AWing heatmap loss against a frozen teacher.
    Distill { weights: CompositeWeights, target: HeatmapTarget },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub total: f64,
    pub latent: f64,
    pub heatmap: f64,
}

impl LossParts {
    fn accumulate(&mut self, o: LossParts, w: f64) {
        self.total += w * o.total;
        self.latent += w * o.latent;
        self.heatmap += w * o.heatmap;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub lr: f64,
    pub train: LossParts,
    pub val: Option<LossParts>,
}

/// Scheduler state carried between runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResumeState {
    pub epoch: usize,
    pub lr: f64,
    pub plateau: PlateauState,
    pub early_stop: EarlyStopState,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    pub logs: Vec<EpochLog>,
    /// Epoch whose weights were kept.
    pub best_epoch: usize,
    pub best_metric: f64,
    pub stopped_early: bool,
    pub state: ResumeState,
}

#[derive(Clone, Copy)]
pub struct Trainer<'a> {
    pub objective: Objective,
    pub config: &'a TrainConfig,
    pub awing: AWingParams,
    pub sigma: f64,
    pub seed: u64,
}

impl Trainer<'_> {
    fn heatmap_target(&self, s: &Sample) -> Result<Vec<f64>, TrainError> {
        match (self.objective, &s.teacher) {
            (Objective::Distill { target: HeatmapTarget::Teacher, .. }, Some(t)) => Ok(to_f64(&t.heatmap)),
            (Objective::Distill { target: HeatmapTarget::Teacher, .. }, None) => {
                Err(ModelError::Config("distillation sample lacks teacher targets".into()).into())
            }
            _ => Ok(encode(&s.keypoints, self.sigma).data),
        }
    }

    fn teacher_latent(&self, s: &Sample) -> Result<Option<Vec<f64>>, TrainError> {
        match self.objective {
            Objective::Supervised => Ok(None),
            Objective::Distill { .. } => s
                .teacher
                .as_ref()
                .map(|t| Some(to_f64(&t.latent)))
                .ok_or_else(|| ModelError::Config("distillation sample lacks teacher latents".into()).into()),
        }
    }

    fn combine(&self, latent: f64, heatmap: f64) -> Result<f64, TrainError> {
        Ok(match self.objective {
            Objective::Supervised => heatmap,
            Objective::Distill { weights, .. } => composite_value(latent, heatmap, weights)?,
        })
    }

    /// Forward and backward on one sample; gradients are scaled by `weight`
    /// and added to the model's buffers.
    fn accumulate(&self, model: &mut PoseModel, s: &Sample, weight: f64) -> Result<LossParts, TrainError> {
        let target = self.heatmap_target(s)?;
        let z_t = self.teacher_latent(s)?;
        let mut g = Graph::new();
        let x = g.input(Tensor::new(&model.input_shape(), to_f64(&s.input))?);
        let z = model.encode(&mut g, x)?;
        let h = model.decode(&mut g, z)?;
        let l_hm = awing(&mut g, h, &target, &self.awing)?;
        let (total, latent) = match (self.objective, z_t) {
            (Objective::Distill { weights, .. }, Some(zt)) => {
                let l_lat = latent_l1(&mut g, z, &zt)?;
                (composite(&mut g, l_lat, l_hm, weights)?, g.value(l_lat).item())
            }
            _ => (l_hm, 0.0),
        };
        let parts = LossParts { total: g.value(total).item(), latent, heatmap: g.value(l_hm).item() };
        if !parts.total.is_finite() {
            return Err(NumericsError::Contract(format!("non-finite loss on frame s{}_t{}_f{}", s.subject_id, s.trial_id, s.frame_index)).into());
        }
        let scaled = g.scale(total, weight);
        g.backward(scaled, &mut model.params)?;
        Ok(parts)
    }

    /// Gradient-free loss on one sample.
    pub fn evaluate(&self, model: &PoseModel, s: &Sample) -> Result<LossParts, TrainError> {
        let target = self.heatmap_target(s)?;
        let out = model.infer(&to_f64(&s.input))?;
        let heatmap = out.heatmap.iter().zip(&target).map(|(&p, &y)| self.awing.value_and_grad(p, y).0).sum::<f64>() / target.len() as f64;
        let latent = match self.teacher_latent(s)? {
            Some(zt) => out.latent.iter().zip(&zt).map(|(a, b)| (a - b).abs()).sum::<f64>() / zt.len() as f64,
            None => 0.0,
        };
        Ok(LossParts { total: self.combine(latent, heatmap)?, latent, heatmap })
    }

    fn mean_loss(&self, model: &PoseModel, samples: &[Sample]) -> Result<LossParts, TrainError> {
        let mut acc = LossParts::default();
        for s in samples {
            acc.accumulate(self.evaluate(model, s)?, 1.0 / samples.len() as f64);
        }
        Ok(acc)
    }

    pub fn fresh_state(&self) -> ResumeState {
        let p = self.config.plateau;
        let mut early_stop = EarlyStopState::new(self.config.early_stop.patience);
        early_stop.min_delta = self.config.early_stop.min_delta;
        ResumeState { epoch: 0, lr: self.config.lr, plateau: PlateauState::new(p.factor, p.patience, p.min_lr, p.min_delta), early_stop }
    }

    /// Runs epochs `state.epoch + 1 ..= max_epochs`. The monitored metric is
    /// the validation loss, or the training loss when `val` is empty; the
    /// model is left holding the weights of the best epoch.
    pub fn fit(
        &self,
        model: &mut PoseModel,
        train: &[Sample],
        val: &[Sample],
        mut state: ResumeState,
        mut on_epoch: impl FnMut(&EpochLog),
    ) -> Result<TrainOutcome, TrainError> {
        if train.is_empty() {
            return Err(TrainError::NoData);
        }
        let mut adam = AdamState::new(&model.params, state.lr);
        let mut order: Vec<usize> = (0..train.len()).collect();
        let mut logs = Vec::new();
        let mut best: Option<(usize, f64, crate::numerics::ParamStore)> = None;
        let mut stopped_early = state.early_stop.stopped;
        let diverged = |epoch: usize, e: TrainError| match e {
            TrainError::Numerics(NumericsError::NonFiniteGradient { param }) => {
                TrainError::Divergence { epoch, reason: format!("non-finite gradient in `{param}`") }
            }
            TrainError::Numerics(NumericsError::Contract(r)) if r.starts_with("non-finite") => TrainError::Divergence { epoch, reason: r },
            e => e,
        };

        while !stopped_early && state.epoch < self.config.max_epochs {
            let epoch = state.epoch + 1;
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(self.seed, epoch as u64));
            order.shuffle(&mut rng);
            let mut train_loss = LossParts::default();
            for batch in order.chunks(self.config.batch_size) {
                model.params.zero_grad();
                let w = 1.0 / batch.len() as f64;
                for &i in batch {
                    let parts = self.accumulate(model, &train[i], w).map_err(|e| diverged(epoch, e))?;
                    train_loss.accumulate(parts, 1.0 / train.len() as f64);
                }
                adam.step(&mut model.params).map_err(|e| diverged(epoch, e.into()))?;
            }
            let val_loss = if val.is_empty() { None } else { Some(self.mean_loss(model, val)?) };
            let metric = val_loss.unwrap_or(train_loss).total;
            if !metric.is_finite() {
                return Err(TrainError::Divergence { epoch, reason: "non-finite monitored loss".into() });
            }
            let log = EpochLog { epoch, lr: state.lr, train: train_loss, val: val_loss };
            on_epoch(&log);
            logs.push(log);

            if best.as_ref().is_none_or(|(_, m, _)| metric < *m) {
                best = Some((epoch, metric, model.params.clone()));
            }
            let lr = state.plateau.step(metric, state.lr);
            if lr != state.lr {
                state.lr = lr;
                adam.set_lr(lr);
            }
            stopped_early = state.early_stop.step(metric);
            state.epoch = epoch;
        }

        let (best_epoch, best_metric) = match best {
            Some((e, m, params)) => {
                model.params = params;
                (e, m)
            }
            None => (state.epoch, f64::NAN),
        };
        Ok(TrainOutcome { logs, best_epoch, best_metric, stopped_early, state })
    }
}

/// `losses.csv`: one row per completed epoch.
pub fn losses_csv(logs: &[EpochLog]) -> String {
    let mut s = String::from("epoch,lr,train_total,train_latent,train_heatmap,val_total,val_latent,val_heatmap\n");
    for l in logs {
        let v = l.val.map(|v| format!("{},{},{}", v.total, v.latent, v.heatmap)).unwrap_or_else(|| ",,".into());
        s.push_str(&format!("{},{},{},{},{},{}\n", l.epoch, l.lr, l.train.total, l.train.latent, l.train.heatmap, v));
    }
    s
}
