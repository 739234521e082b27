//! Person localization in thermal frames and aspect-correct 256×192 crops.

use crate::keypoints::{CoordFrame, KeypointSet};
use crate::synthtug::{CameraConfig, CameraRelation, Frame, THERMAL_H, THERMAL_W};
use serde::{Deserialize, Serialize};

pub const CROP_H: usize = 256;
pub const CROP_W: usize = 192;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PreprocError {
    #[error("no person detected")]
    NoPersonDetected,
    #[error("contract violated: {0}")]
    Contract(String),
}

/// Axis-aligned box in continuous source pixel coordinates
/// (pixel `i` covers `[i, i + 1)`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
    pub score: f64,
}

impl BBox {
    pub fn x0(&self) -> f64 {
        self.cx - self.w / 2.0
    }
    pub fn y0(&self) -> f64 {
        self.cy - self.h / 2.0
    }
    pub fn x1(&self) -> f64 {
        self.cx + self.w / 2.0
    }
    pub fn y1(&self) -> f64 {
        self.cy + self.h / 2.0
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0() && x <= self.x1() && y >= self.y0() && y <= self.y1()
    }

    /// Grown about the center to height:width = 4:3; never shrinks.
    pub fn to_crop_aspect(&self) -> BBox {
        let ratio = CROP_H as f64 / CROP_W as f64;
        let (w, h) = if self.h / self.w < ratio { (self.w, self.w * ratio) } else { (self.h / ratio, self.h) };
        BBox { w, h, ..*self }
    }

    /// The same box in RGB pixel coordinates.
    pub fn to_rgb(&self, rel: &CameraRelation) -> BBox {
        let (cx, cy) = rel.thermal_to_rgb(self.cx, self.cy);
        BBox { cx, cy, w: self.w * rel.scale, h: self.h * rel.scale, score: self.score }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    /// Dilation per side as a fraction of the component extent.
    pub margin: f64,
    pub min_component: usize,
    /// Multiplier on the background spread for the threshold floor.
    pub floor_sigmas: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self { margin: 0.125, min_component: 6, floor_sigmas: 2.0 }
    }
}

/// Detector output with the intensity statistics used for input normalization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub bbox: BBox,
    pub threshold: f64,
    pub background: f64,
    /// Mean raw intensity inside the selected component.
    pub foreground: f64,
    pub component_size: usize,
}

fn otsu(values: &[f64], lo: f64, hi: f64) -> f64 {
    const BINS: usize = 256;
    let width = (hi - lo) / BINS as f64;
    let mut hist = [0usize; BINS];
    for &v in values {
        hist[(((v - lo) / width) as usize).min(BINS - 1)] += 1;
    }
    let total = values.len() as f64;
    let sum_all: f64 = hist.iter().enumerate().map(|(i, &c)| i as f64 * c as f64).sum();
    let (mut w0, mut sum0) = (0.0, 0.0);
    let (mut best, mut best_var) = (0, -1.0);
    for (i, &c) in hist.iter().enumerate().take(BINS - 1) {
        w0 += c as f64;
        sum0 += i as f64 * c as f64;
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let d = sum0 / w0 - (sum_all - sum0) / w1;
        let var = w0 * w1 * d * d;
        if var > best_var {
            best_var = var;
            best = i;
        }
    }
    lo + (best + 1) as f64 * width
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Robust background level and spread: median and scaled MAD.
pub fn background_stats(image: &[f64]) -> (f64, f64) {
    let mut v = image.to_vec();
    v.sort_by(f64::total_cmp);
    let med = median(&v);
    let mut dev: Vec<f64> = v.iter().map(|x| (x - med).abs()).collect();
    dev.sort_by(f64::total_cmp);
    (med, 1.4826 * median(&dev))
}

/// Labels 8-connected components of `mask`; returns pixel lists.
fn components(mask: &[bool], width: usize, height: usize) -> Vec<Vec<usize>> {
    let mut seen = vec![false; mask.len()];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut comp = Vec::new();
        while let Some(p) = stack.pop() {
            comp.push(p);
            let (x, y) = ((p % width) as isize, (p / width) as isize);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= width as isize || ny >= height as isize {
                        continue;
                    }
                    let q = ny as usize * width + nx as usize;
                    if mask[q] && !seen[q] {
                        seen[q] = true;
                        stack.push(q);
                    }
                }
            }
        }
        out.push(comp);
    }
    out
}

/// Largest warm connected component, thresholded by Otsu's method with a
/// floor at the background level plus `floor_sigmas` spreads.
pub fn detect_person(image: &[f64], width: usize, height: usize, cfg: &DetectorConfig) -> Result<Detection, PreprocError> {
    if image.len() != width * height || image.is_empty() {
        return Err(PreprocError::Contract(format!("image of {} values is not {width}x{height}", image.len())));
    }
    let lo = image.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = image.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Err(PreprocError::NoPersonDetected);
    }
    let (background, spread) = background_stats(image);
    let threshold = otsu(image, lo, hi).max(background + cfg.floor_sigmas * spread);
    let mask: Vec<bool> = image.iter().map(|&v| v > threshold).collect();
    let best = components(&mask, width, height)
        .into_iter()
        .fold(None::<Vec<usize>>, |best, c| match best {
            Some(b) if b.len() >= c.len() => Some(b),
            _ => Some(c),
        })
        .filter(|c| c.len() >= cfg.min_component)
        .ok_or(PreprocError::NoPersonDetected)?;

    let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
    let mut sum = 0.0;
    let mut norm = 0.0;
    for &p in &best {
        let (x, y) = (p % width, p / width);
        x0 = x0.min(x);
        y0 = y0.min(y);
        x1 = x1.max(x);
        y1 = y1.max(y);
        sum += image[p];
        norm += (image[p] - lo) / (hi - lo);
    }
    let (w, h) = ((x1 + 1 - x0) as f64, (y1 + 1 - y0) as f64);
    let bbox = BBox {
        cx: (x0 + x1 + 1) as f64 / 2.0,
        cy: (y0 + y1 + 1) as f64 / 2.0,
        w: w * (1.0 + 2.0 * cfg.margin),
        h: h * (1.0 + 2.0 * cfg.margin),
        score: norm / best.len() as f64,
    };
    Ok(Detection { bbox, threshold, background, foreground: sum / best.len() as f64, component_size: best.len() })
}

/// Detector with default settings on a raw 16-bit thermal frame.
pub fn detect_person_bbox(thermal: &[u16], width: usize, height: usize) -> Result<BBox, PreprocError> {
    let img: Vec<f64> = thermal.iter().map(|&v| v as f64).collect();
    detect_person(&img, width, height, &DetectorConfig::default()).map(|d| d.bbox)
}

/// Crop→source affine map: `x_s = offset_x + scale_x · x_c`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CropTransform {
    pub scale_x: f64,
    pub scale_y: f64,
    pub offset_x: f64,
    pub offset_y: f64,
}

impl CropTransform {
    pub const IDENTITY: CropTransform = CropTransform { scale_x: 1.0, scale_y: 1.0, offset_x: 0.0, offset_y: 0.0 };

    pub fn to_source(&self, x: f64, y: f64) -> (f64, f64) {
        (self.offset_x + self.scale_x * x, self.offset_y + self.scale_y * y)
    }

    pub fn to_crop(&self, x: f64, y: f64) -> (f64, f64) {
        ((x - self.offset_x) / self.scale_x, (y - self.offset_y) / self.scale_y)
    }

    /// Transform for the crop of `bbox` (after 4:3 expansion).
    pub fn for_bbox(bbox: &BBox) -> Result<Self, PreprocError> {
        if !(bbox.w > 0.0 && bbox.h > 0.0) || !bbox.cx.is_finite() || !bbox.cy.is_finite() {
            return Err(PreprocError::Contract(format!("degenerate bbox {}x{}", bbox.w, bbox.h)));
        }
        let b = bbox.to_crop_aspect();
        Ok(CropTransform {
            scale_x: b.w / CROP_W as f64,
            scale_y: b.h / CROP_H as f64,
            offset_x: b.x0(),
            offset_y: b.y0(),
        })
    }
}

/// Interleaved multi-channel image.
#[derive(Clone, Copy, Debug)]
pub struct ImageRef<'a> {
    pub data: &'a [f64],
    pub width: usize,
    pub height: usize,
    pub channels: usize,
}

/// Crops `bbox` (expanded to 4:3) and resamples it to 256×192 by bilinear
/// interpolation at pixel centers. Output is channel-planar. Taps that fall
/// outside the source read `fill`.
pub fn crop_resize(image: ImageRef, bbox: &BBox, fill: f64) -> Result<(Vec<f64>, CropTransform), PreprocError> {
    let t = CropTransform::for_bbox(bbox)?;
    if image.data.len() != image.width * image.height * image.channels {
        return Err(PreprocError::Contract("image buffer does not match its dimensions".into()));
    }
    let c = image.channels;
    let mut out = vec![0.0; c * CROP_H * CROP_W];
    let tap = |x: isize, y: isize, ch: usize| -> f64 {
        if x < 0 || y < 0 || x >= image.width as isize || y >= image.height as isize {
            fill
        } else {
            image.data[(y as usize * image.width + x as usize) * c + ch]
        }
    };
    let xs: Vec<(isize, f64)> = (0..CROP_W)
        .map(|i| {
            let s = t.offset_x + t.scale_x * (i as f64 + 0.5) - 0.5;
            (s.floor() as isize, s - s.floor())
        })
        .collect();
    for j in 0..CROP_H {
        let s = t.offset_y + t.scale_y * (j as f64 + 0.5) - 0.5;
        let (y, fy) = (s.floor() as isize, s - s.floor());
        for (i, &(x, fx)) in xs.iter().enumerate() {
            for ch in 0..c {
                let top = tap(x, y, ch) * (1.0 - fx) + tap(x + 1, y, ch) * fx;
                let bot = tap(x, y + 1, ch) * (1.0 - fx) + tap(x + 1, y + 1, ch) * fx;
                out[(ch * CROP_H + j) * CROP_W + i] = top * (1.0 - fy) + bot * fy;
            }
        }
    }
    Ok((out, t))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    ToCrop,
    ToSource,
}

/// Maps keypoints between crop and source coordinates. Points that leave
/// the crop on the way in become invisible.
pub fn transform_keypoints(kps: &KeypointSet, t: &CropTransform, direction: Direction, source: CoordFrame) -> KeypointSet {
    match direction {
        Direction::ToSource => kps.map_coords(source, |x, y| t.to_source(x, y)),
        Direction::ToCrop => {
            let mut out = kps.map_coords(CoordFrame::Crop, |x, y| t.to_crop(x, y));
            for p in &mut out.points {
                if !(p.x >= 0.0 && p.x < CROP_W as f64 && p.y >= 0.0 && p.y < CROP_H as f64) {
                    p.v = 0;
                }
            }
            out
        }
    }
}

/// Thermal crop rescaled so background is 0 and the detected body is 1.
pub fn normalize_thermal(crop: &mut [f64], det: &Detection) {
    let span = (det.foreground - det.background).max(1e-6);
    for v in crop {
        *v = (*v - det.background) / span;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Thermal,
    Rgb,
}

impl Modality {
    pub fn channels(self) -> usize {
        match self {
            Modality::Thermal => 1,
            Modality::Rgb => 3,
        }
    }
}

/// Network-ready crop of one frame. Both modalities share crop coordinates,
/// so `transform` always maps crop pixels to thermal pixels.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub input: Vec<f64>,
    pub transform: CropTransform,
    pub detection: Detection,
}

/// Detects on the thermal frame and crops `modality` around the detection.
/// Thermal crops are scaled so background is 0 and body is 1; RGB crops map
/// `[0, 255]` to `[-0.5, 0.5]`.
pub fn prepare_frame(frame: &Frame, camera: &CameraConfig, modality: Modality, det_cfg: &DetectorConfig) -> Result<Prepared, PreprocError> {
    let thermal = frame.thermal_f64();
    let detection = detect_person(&thermal, THERMAL_W, THERMAL_H, det_cfg)?;
    prepare_with(frame, camera, modality, detection)
}

/// As [`prepare_frame`] with a precomputed detection.
pub fn prepare_with(frame: &Frame, camera: &CameraConfig, modality: Modality, detection: Detection) -> Result<Prepared, PreprocError> {
    let (input, transform) = match modality {
        Modality::Thermal => {
            let thermal = frame.thermal_f64();
            let img = ImageRef { data: &thermal, width: THERMAL_W, height: THERMAL_H, channels: 1 };
            let (mut crop, t) = crop_resize(img, &detection.bbox, detection.background)?;
            normalize_thermal(&mut crop, &detection);
            (crop, t)
        }
        Modality::Rgb => {
            let rgb: Vec<f64> = frame.rgb.iter().map(|&v| v as f64 / 255.0 - 0.5).collect();
            let img = ImageRef { data: &rgb, width: frame.rgb_width, height: frame.rgb_height, channels: 3 };
            let rb = detection.bbox.to_rgb(&camera.relation());
            let (crop, _) = crop_resize(img, &rb, 0.0)?;
            (crop, CropTransform::for_bbox(&detection.bbox)?)
        }
    };
    Ok(Prepared { input, transform, detection })
}
