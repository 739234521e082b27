use super::report::FoldMetrics;
use super::{average_precision, ApInterpolation, DetInstance, EvalError, FoldSpec, FrameInstances, GtInstance, OksConstants};
use crate::heatmap::decode_slice;
use crate::keypoints::{CoordFrame, Keypoint, KeypointSet, NUM_KEYPOINTS};
use crate::posemodel::PoseModel;
use crate::preproc::{prepare_frame, DetectorConfig, Modality, PreprocError};
use crate::synthtug::{CameraConfig, Dataset, Frame};
use serde::{Deserialize, Serialize};

/// Keypoints in thermal source coordinates with a ranking score.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub keypoints: KeypointSet,
    pub confidences: [f64; NUM_KEYPOINTS],
    pub score: f64,
}

pub trait Predictor {
    fn predict(&self, frame: &Frame) -> Result<Prediction, PreprocError>;
}

/// Full pipeline: detect, crop, encode, decode, map back to the thermal frame.
pub struct ModelPredictor<'a> {
    pub model: &'a PoseModel,
    pub modality: Modality,
    pub camera: CameraConfig,
    pub detector: DetectorConfig,
}

impl<'a> ModelPredictor<'a> {
    pub fn new(model: &'a PoseModel, modality: Modality, camera: CameraConfig) -> Self {
        Self { model, modality, camera, detector: DetectorConfig::default() }
    }
}

impl Predictor for ModelPredictor<'_> {
    fn predict(&self, frame: &Frame) -> Result<Prediction, PreprocError> {
        let prep = prepare_frame(frame, &self.camera, self.modality, &self.detector)?;
        let out = self.model.infer(&prep.input).map_err(|e| PreprocError::Contract(e.to_string()))?;
        let dec = decode_slice(&out.heatmap);
        let t = prep.transform;
        let points = dec.points.map(|p| {
            let (x, y) = t.to_source(p.x, p.y);
            Keypoint::new(x, y, 2)
        });
        Ok(Prediction {
            keypoints: KeypointSet::new(CoordFrame::Thermal, points),
            confidences: dec.points.map(|p| p.confidence),
            score: prep.detection.bbox.score * dec.mean_confidence(),
        })
    }
}

/// Ground truth shifted by a fixed offset, for pipeline checks.
#[derive(Clone, Copy, Debug, Default)]
pub struct OraclePredictor {
    pub offset: (f64, f64),
}

impl Predictor for OraclePredictor {
    fn predict(&self, frame: &Frame) -> Result<Prediction, PreprocError> {
        let (dx, dy) = self.offset;
        Ok(Prediction {
            keypoints: frame.gt_keypoints.map_coords(CoordFrame::Thermal, |x, y| (x + dx, y + dy)),
            confidences: [1.0; NUM_KEYPOINTS],
            score: 1.0,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameResult {
    pub subject_id: u32,
    pub trial_id: u32,
    pub frame_index: u32,
    pub detected: bool,
    pub score: Option<f64>,
    pub oks: Option<f64>,
}

fn frame_id(f: &Frame) -> u64 {
    ((f.subject_id as u64) << 40) | ((f.trial_id as u64) << 20) | f.frame_index as u64
}

/// Scores every usable frame of the held-out subject. Undetected frames
/// contribute a ground truth with no detection.
pub fn evaluate_pipeline(
    predictor: &dyn Predictor,
    dataset: &Dataset,
    fold: &FoldSpec,
    consts: &OksConstants,
    interp: ApInterpolation,
) -> Result<(FoldMetrics, Vec<FrameResult>), EvalError> {
    let mut instances = Vec::new();
    let mut results = Vec::new();
    let mut failures = 0;
    for f in dataset.frames_of(fold.held_out_subject).filter(|f| !f.dropped) {
        let Some(gt) = GtInstance::from_keypoints(f.gt_keypoints.clone()) else { continue };
        let id = frame_id(f);
        let (dets, score) = match predictor.predict(f) {
            Ok(p) => (vec![DetInstance { keypoints: p.keypoints, score: p.score }], Some(p.score)),
            Err(PreprocError::NoPersonDetected) => {
                failures += 1;
                (Vec::new(), None)
            }
            Err(e) => return Err(EvalError::Config(e.to_string())),
        };
        let inst = FrameInstances::new(id, dets, std::slice::from_ref(&gt), consts)?;
        results.push(FrameResult {
            subject_id: f.subject_id,
            trial_id: f.trial_id,
            frame_index: f.frame_index,
            detected: score.is_some(),
            score,
            oks: inst.oks.first().map(|row| row[0]),
        });
        instances.push(inst);
    }
    let ap = average_precision(&instances, interp)?;
    let scored: Vec<f64> = results.iter().filter_map(|r| r.oks).collect();
    let mean_oks = if scored.is_empty() { 0.0 } else { scored.iter().sum::<f64>() / scored.len() as f64 };
    Ok((
        FoldMetrics {
            held_out_subject: fold.held_out_subject,
            frames: results.len(),
            detection_failures: failures,
            ap: ap.ap,
            ap50: ap.ap50,
            ap75: ap.ap75,
            mean_oks,
            per_threshold: ap.per_threshold,
        },
        results,
    ))
}
