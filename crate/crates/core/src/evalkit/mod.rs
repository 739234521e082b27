//! Object keypoint similarity, COCO-style average precision, leave-one-subject-out
//! folds, and the end-to-end evaluation pipeline.

mod pipeline;
mod report;

pub use pipeline::{evaluate_pipeline, FrameResult, ModelPredictor, OraclePredictor, Prediction, Predictor};
pub use report::{FoldMetrics, MeanStd, MetricsReport, MetricsSummary};

use crate::keypoints::{KeypointSet, NUM_KEYPOINTS};
use crate::synthtug::DatasetManifest;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("OKS undefined: ground truth has no visible keypoint")]
    UndefinedOks,
    #[error("metric undefined: {0}")]
    UndefinedMetric(String),
    #[error("config error: {0}")]
    Config(String),
}

/// Published per-keypoint standard deviations of the COCO keypoint benchmark.
pub const COCO_SIGMAS: [f64; NUM_KEYPOINTS] = [
    0.026, 0.025, 0.025, 0.035, 0.035, 0.079, 0.079, 0.072, 0.072, 0.062, 0.062, 0.107, 0.107, 0.087, 0.087, 0.089,
    0.089,
];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OksConstants {
    pub k: [f64; NUM_KEYPOINTS],
}

impl OksConstants {
    /// `k = 2σ`, matching the reference COCO evaluator's falloff.
    pub fn coco() -> Self {
        Self { k: COCO_SIGMAS.map(|s| 2.0 * s) }
    }

    /// `k = σ`, twice as strict in distance as [`OksConstants::coco`].
    pub fn sigmas() -> Self {
        Self { k: COCO_SIGMAS }
    }
}

impl Default for OksConstants {
    fn default() -> Self {
        Self::coco()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GtInstance {
    pub keypoints: KeypointSet,
    pub scale_sq: f64,
}

impl GtInstance {
    /// Scale from the tight box around visible keypoints, each side padded
    /// by 10% (extents below one pixel count as one pixel).
    pub fn from_keypoints(keypoints: KeypointSet) -> Option<Self> {
        let [x0, y0, x1, y1] = keypoints.visible_bounds()?;
        let w = (x1 - x0).max(1.0) * 1.1;
        let h = (y1 - y0).max(1.0) * 1.1;
        Some(Self { keypoints, scale_sq: w * h })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetInstance {
    /// Predicted positions in the scoring frame; visibility is ignored.
    pub keypoints: KeypointSet,
    pub score: f64,
}

pub fn oks(det: &DetInstance, gt: &GtInstance, consts: &OksConstants) -> Result<f64, EvalError> {
    let mut num = 0.0;
    let mut den = 0usize;
    for i in 0..NUM_KEYPOINTS {
        let g = gt.keypoints.points[i];
        if g.v == 0 {
            continue;
        }
        let d = det.keypoints.points[i];
        let d2 = (d.x - g.x).powi(2) + (d.y - g.y).powi(2);
        num += (-d2 / (2.0 * gt.scale_sq * consts.k[i] * consts.k[i])).exp();
        den += 1;
    }
    if den == 0 {
        return Err(EvalError::UndefinedOks);
    }
    Ok(num / den as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Label {
    Tp,
    Fp,
}

/// Outcome of greedy matching on one frame.
#[derive(Clone, Debug, PartialEq)]
pub struct MatchResult {
    /// Per detection in input order: label and the OKS of its claim (or best OKS if unmatched).
    pub dets: Vec<(Label, f64)>,
    /// Per gt: index of the claiming detection.
    pub gt_claimed_by: Vec<Option<usize>>,
}

impl MatchResult {
    pub fn false_negatives(&self) -> usize {
        self.gt_claimed_by.iter().filter(|c| c.is_none()).count()
    }
}

/// OKS between every detection and every ground truth instance.
pub fn oks_matrix(dets: &[DetInstance], gts: &[GtInstance], consts: &OksConstants) -> Result<Vec<Vec<f64>>, EvalError> {
    dets.iter().map(|d| gts.iter().map(|g| oks(d, g, consts)).collect()).collect()
}

fn descending_order(dets: &[DetInstance], tie: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| {
        dets[b].score.total_cmp(&dets[a].score).then(tie[b].total_cmp(&tie[a])).then(a.cmp(&b))
    });
    order
}

/// Greedy matching on a precomputed OKS matrix.
pub fn match_with_oks(dets: &[DetInstance], oks_m: &[Vec<f64>], n_gt: usize, threshold: f64) -> MatchResult {
    let best: Vec<f64> = oks_m.iter().map(|row| row.iter().copied().fold(0.0, f64::max)).collect();
    let mut claimed: Vec<Option<usize>> = vec![None; n_gt];
    let mut labels = vec![(Label::Fp, 0.0); dets.len()];
    for d in descending_order(dets, &best) {
        let mut pick: Option<(usize, f64)> = None;
        for (g, &o) in oks_m[d].iter().enumerate() {
            if claimed[g].is_none() && o >= threshold && pick.is_none_or(|(_, po)| o > po) {
                pick = Some((g, o));
            }
        }
        labels[d] = match pick {
            Some((g, o)) => {
                claimed[g] = Some(d);
                (Label::Tp, o)
            }
            None => (Label::Fp, best[d]),
        };
    }
    MatchResult { dets: labels, gt_claimed_by: claimed }
}

/// Detections claim, in descending score order, the unclaimed gt of highest OKS at or above `threshold`.
pub fn match_instances(dets: &[DetInstance], gts: &[GtInstance], threshold: f64, consts: &OksConstants) -> Result<MatchResult, EvalError> {
    let m = oks_matrix(dets, gts, consts)?;
    Ok(match_with_oks(dets, &m, gts.len(), threshold))
}

/// Detections and ground truth of one frame with their OKS matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameInstances {
    pub frame_id: u64,
    pub dets: Vec<DetInstance>,
    pub n_gt: usize,
    pub oks: Vec<Vec<f64>>,
}

impl FrameInstances {
    pub fn new(frame_id: u64, dets: Vec<DetInstance>, gts: &[GtInstance], consts: &OksConstants) -> Result<Self, EvalError> {
        let oks = oks_matrix(&dets, gts, consts)?;
        Ok(Self { frame_id, dets, n_gt: gts.len(), oks })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApInterpolation {
    /// Exact area under the monotone precision envelope.
    #[default]
    AllPoint,
    /// Mean envelope precision sampled at recall 0, 0.01, …, 1.
    Coco101,
}

/// OKS thresholds 0.50, 0.55, …, 0.95.
pub fn oks_thresholds() -> [f64; 10] {
    std::array::from_fn(|i| (50 + 5 * i) as f64 / 100.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApResult {
    pub ap: f64,
    pub ap50: f64,
    pub ap75: f64,
    pub per_threshold: [f64; 10],
}

/// Precision-recall area for one OKS threshold over all frames.
pub fn ap_at(frames: &[FrameInstances], threshold: f64, interp: ApInterpolation) -> Result<f64, EvalError> {
    let n_gt: usize = frames.iter().map(|f| f.n_gt).sum();
    if n_gt == 0 {
        return Err(EvalError::UndefinedMetric("no ground-truth instances".into()));
    }
    // (score, oks, frame, det, label)
    let mut ranked = Vec::new();
    for f in frames {
        let m = match_with_oks(&f.dets, &f.oks, f.n_gt, threshold);
        for (i, (label, o)) in m.dets.into_iter().enumerate() {
            ranked.push((f.dets[i].score, o, f.frame_id, i, label));
        }
    }
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(b.1.total_cmp(&a.1)).then(a.2.cmp(&b.2)).then(a.3.cmp(&b.3)));
    let mut tp = 0usize;
    let mut precision = Vec::with_capacity(ranked.len());
    let mut recall = Vec::with_capacity(ranked.len());
    for (k, r) in ranked.iter().enumerate() {
        if r.4 == Label::Tp {
            tp += 1;
        }
        precision.push(tp as f64 / (k + 1) as f64);
        recall.push(tp as f64 / n_gt as f64);
    }
    for i in (0..precision.len().saturating_sub(1)).rev() {
        precision[i] = precision[i].max(precision[i + 1]);
    }
    Ok(match interp {
        ApInterpolation::AllPoint => {
            let mut area = 0.0;
            let mut prev_r = 0.0;
            for (p, r) in precision.iter().zip(&recall) {
                area += (r - prev_r) * p;
                prev_r = *r;
            }
            area
        }
        ApInterpolation::Coco101 => {
            let mut sum = 0.0;
            for i in 0..=100 {
                let r = i as f64 / 100.0;
                let idx = recall.partition_point(|&x| x < r);
                sum += precision.get(idx).copied().unwrap_or(0.0);
            }
            sum / 101.0
        }
    })
}

pub fn average_precision(frames: &[FrameInstances], interp: ApInterpolation) -> Result<ApResult, EvalError> {
    let th = oks_thresholds();
    let mut per = [0.0; 10];
    for (p, &t) in per.iter_mut().zip(&th) {
        *p = ap_at(frames, t, interp)?;
    }
    Ok(ApResult { ap: per.iter().sum::<f64>() / 10.0, ap50: per[0], ap75: per[5], per_threshold: per })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSpec {
    pub held_out_subject: u32,
    pub train_subjects: Vec<u32>,
}

pub fn loso_folds(manifest: &DatasetManifest) -> Result<Vec<FoldSpec>, EvalError> {
    let ids = manifest.subject_ids();
    if ids.len() < 2 {
        return Err(EvalError::Config(format!("leave-one-subject-out needs at least 2 subjects, found {}", ids.len())));
    }
    Ok(ids
        .iter()
        .map(|&h| FoldSpec { held_out_subject: h, train_subjects: ids.iter().copied().filter(|&s| s != h).collect() })
        .collect())
}
