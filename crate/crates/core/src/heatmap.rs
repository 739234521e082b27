//! Gaussian keypoint heatmaps at stride 4 and quarter-offset peak decoding.
//!
//! Heatmap cell `(u, v)` corresponds to crop coordinate `(4u, 4v)`.

use crate::keypoints::{CoordFrame, Keypoint, KeypointSet, NUM_KEYPOINTS};
use serde::{Deserialize, Serialize};

pub const HM_H: usize = 64;
pub const HM_W: usize = 48;
pub const STRIDE: f64 = 4.0;
pub const DEFAULT_SIGMA: f64 = 2.0;
pub const HM_LEN: usize = NUM_KEYPOINTS * HM_H * HM_W;

/// 17 × 64 × 48 channel-planar heatmap.
#[derive(Clone, Debug, PartialEq)]
pub struct Heatmap {
    pub data: Vec<f64>,
}

impl Heatmap {
    pub fn zeros() -> Self {
        Self { data: vec![0.0; HM_LEN] }
    }

    pub fn from_vec(data: Vec<f64>) -> Self {
        assert_eq!(data.len(), HM_LEN, "heatmap must hold 17x64x48 values");
        Self { data }
    }

    pub fn channel(&self, k: usize) -> &[f64] {
        &self.data[k * HM_H * HM_W..(k + 1) * HM_H * HM_W]
    }

    pub fn at(&self, k: usize, u: usize, v: usize) -> f64 {
        self.data[(k * HM_H + v) * HM_W + u]
    }
}

/// One decoded keypoint in crop coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decoded {
    pub x: f64,
    pub y: f64,
    pub confidence: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecodedKeypoints {
    pub points: [Decoded; NUM_KEYPOINTS],
}

impl DecodedKeypoints {
    pub fn mean_confidence(&self) -> f64 {
        self.points.iter().map(|p| p.confidence).sum::<f64>() / NUM_KEYPOINTS as f64
    }

    /// As a crop-frame keypoint set; every channel is reported visible.
    pub fn to_keypoint_set(&self) -> KeypointSet {
        KeypointSet::new(CoordFrame::Crop, self.points.map(|p| Keypoint::new(p.x, p.y, 2)))
    }
}

/// Renders one unnormalized Gaussian per visible keypoint, peak 1 at `(x/4, y/4)`.
pub fn encode(kps: &KeypointSet, sigma: f64) -> Heatmap {
    assert!(sigma > 0.0, "sigma must be positive");
    let mut hm = Heatmap::zeros();
    let inv = 1.0 / (2.0 * sigma * sigma);
    for (k, p) in kps.points.iter().enumerate() {
        if !p.is_visible() {
            continue;
        }
        let (mx, my) = (p.x / STRIDE, p.y / STRIDE);
        let gx: Vec<f64> = (0..HM_W).map(|u| (-(u as f64 - mx).powi(2) * inv).exp()).collect();
        let ch = &mut hm.data[k * HM_H * HM_W..(k + 1) * HM_H * HM_W];
        for v in 0..HM_H {
            let gy = (-(v as f64 - my).powi(2) * inv).exp();
            for u in 0..HM_W {
                ch[v * HM_W + u] = gx[u] * gy;
            }
        }
    }
    hm
}

fn quarter(left: f64, right: f64) -> f64 {
    if right > left {
        0.25
    } else if left > right {
        -0.25
    } else {
        0.0
    }
}

/// Argmax per channel, shifted a quarter cell toward the larger neighbor on
/// each axis (interior cells only), scaled back to crop pixels.
pub fn decode_slice(hm: &[f64]) -> DecodedKeypoints {
    assert_eq!(hm.len(), HM_LEN);
    let points = std::array::from_fn(|k| {
        let ch = &hm[k * HM_H * HM_W..(k + 1) * HM_H * HM_W];
        let (mut best, mut peak) = (0, f64::NEG_INFINITY);
        for (i, &v) in ch.iter().enumerate() {
            if v > peak {
                peak = v;
                best = i;
            }
        }
        let (u, v) = (best % HM_W, best / HM_W);
        let mut x = u as f64;
        let mut y = v as f64;
        if u > 0 && u + 1 < HM_W {
            x += quarter(ch[best - 1], ch[best + 1]);
        }
        if v > 0 && v + 1 < HM_H {
            y += quarter(ch[best - HM_W], ch[best + HM_W]);
        }
        Decoded { x: x * STRIDE, y: y * STRIDE, confidence: peak.clamp(0.0, 1.0) }
    });
    DecodedKeypoints { points }
}

pub fn decode(hm: &Heatmap) -> DecodedKeypoints {
    decode_slice(&hm.data)
}

/// Crop-pixel error of `decode(encode(kps))` per keypoint; `None` for invisible ones.
pub fn roundtrip_error(kps: &KeypointSet, sigma: f64) -> Vec<Option<f64>> {
    let d = decode(&encode(kps, sigma));
    kps.points
        .iter()
        .zip(&d.points)
        .map(|(p, q)| p.is_visible().then(|| ((p.x - q.x).powi(2) + (p.y - q.y).powi(2)).sqrt()))
        .collect()
}
