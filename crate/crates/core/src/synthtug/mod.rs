//! Procedural paired RGB/thermal Timed-Up-and-Go recordings with exact
//! ground-truth keypoints, plus the on-disk dataset format.
//!
//! Every frame is a pure function of `(dataset seed, subject index, trial
//! index, frame index)`, so any frame can be regenerated bit-exactly.

mod io;
pub mod motion;
pub mod pnm;
pub mod render;
pub mod scene;
pub mod subject;

pub use io::{read_dataset, write_dataset, DataError};
pub use motion::{simulate_tug, simulate_tug_with, JointAngles, MotionConfig, Phase, TrialPlan, TugPose};
pub use render::{render_frame, Frame, NoiseSource};
pub use scene::{CameraConfig, CameraRelation, Skeleton, THERMAL_H, THERMAL_W};
pub use subject::{sample_subject, LimbLengths, Subject};

use serde::{Deserialize, Serialize};

pub const FORMAT_VERSION: u32 = 1;

/// SplitMix64 finalizer, used to derive independent child seeds.
pub fn mix_seed(parent: u64, child: u64) -> u64 {
    let mut z = parent ^ child.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_mul(0xD6E8_FEB8_6659_FD93);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub seed: u64,
    pub subjects: u32,
    pub trials: u32,
    pub motion: MotionConfig,
    pub camera: CameraConfig,
    /// Fraction of frames flagged as capture drop-outs.
    pub drop_fraction: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            subjects: 10,
            trials: 5,
            motion: MotionConfig::default(),
            camera: CameraConfig::default(),
            drop_fraction: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialEntry {
    pub subject_id: u32,
    pub trial_id: u32,
    pub frame_count: u32,
    pub fps: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub subjects: Vec<Subject>,
    pub trials: Vec<TrialEntry>,
    pub rgb_resolution: [usize; 2],
    pub thermal_resolution: [usize; 2],
    pub config: SynthConfig,
}

impl DatasetManifest {
    pub fn subject_ids(&self) -> Vec<u32> {
        self.subjects.iter().map(|s| s.id).collect()
    }
}

/// Frames of one dataset, in (subject, trial, frame) order.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub frames: Vec<Frame>,
}

impl Dataset {
    pub fn frames_of(&self, subject_id: u32) -> impl Iterator<Item = &Frame> {
        self.frames.iter().filter(move |f| f.subject_id == subject_id)
    }

    pub fn find(&self, subject_id: u32, trial_id: u32, frame_index: u32) -> Option<&Frame> {
        self.frames
            .iter()
            .find(|f| f.subject_id == subject_id && f.trial_id == trial_id && f.frame_index == frame_index)
    }
}

/// Seeds that determine the subject and trial streams.
pub fn subject_seed(cfg: &SynthConfig, subject: u32) -> u64 {
    mix_seed(cfg.seed, 0x5B_0000 + subject as u64)
}

pub fn trial_seed(cfg: &SynthConfig, subject: u32, trial: u32) -> u64 {
    mix_seed(subject_seed(cfg, subject), 0x7A_0000 + trial as u64)
}

pub fn subject_for(cfg: &SynthConfig, subject: u32) -> Subject {
    Subject { id: subject, ..sample_subject(subject_seed(cfg, subject)) }
}

/// Regenerates a single frame.
pub fn generate_frame(cfg: &SynthConfig, fixed_pattern: &[f64], subject: &Subject, trial: u32, index: u32) -> Frame {
    let tseed = trial_seed(cfg, subject.id, trial);
    let plan = TrialPlan::new(subject, tseed, cfg.motion.duration_s);
    let pose = plan.pose_at(index as f64 / cfg.motion.fps as f64);
    let noise = NoiseSource { fixed_pattern, frame_seed: mix_seed(tseed, index as u64) };
    let mut frame = render_frame(&pose, subject, &cfg.camera, &noise, mix_seed(cfg.seed, 0x7E47));
    frame.trial_id = trial;
    frame.frame_index = index;
    frame.dropped = cfg.drop_fraction > 0.0
        && (mix_seed(tseed, 0xD0_0000 + index as u64) >> 11) as f64 / (1u64 << 53) as f64 <= cfg.drop_fraction;
    frame
}

pub fn generate_dataset(cfg: &SynthConfig) -> Dataset {
    let fpn = render::fixed_pattern(mix_seed(cfg.seed, 0xF9A));
    let n = (cfg.motion.duration_s * cfg.motion.fps as f64).round() as u32;
    let subjects: Vec<Subject> = (0..cfg.subjects).map(|s| subject_for(cfg, s)).collect();
    let mut trials = Vec::new();
    let mut frames = Vec::new();
    for subj in &subjects {
        for t in 0..cfg.trials {
            trials.push(TrialEntry { subject_id: subj.id, trial_id: t, frame_count: n, fps: cfg.motion.fps });
            frames.extend((0..n).map(|i| generate_frame(cfg, &fpn, subj, t, i)));
        }
    }
    Dataset {
        manifest: DatasetManifest {
            format_version: FORMAT_VERSION,
            subjects,
            trials,
            rgb_resolution: [cfg.camera.rgb_width, cfg.camera.rgb_height],
            thermal_resolution: [THERMAL_W, THERMAL_H],
            config: cfg.clone(),
        },
        frames,
    }
}
