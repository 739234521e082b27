//! Rasterization of the capsule figure into paired RGB and thermal frames.

use super::motion::TugPose;
use super::scene::{CameraConfig, Capsule, Material, Skeleton, View, THERMAL_H, THERMAL_W};
use super::subject::Subject;
use crate::keypoints::{CoordFrame, KeypointSet};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Paired capture of one time step.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    /// 80×60 row-major sensor values.
    pub thermal: Vec<u16>,
    /// Row-major interleaved RGB, `rgb_width`×`rgb_height`×3.
    pub rgb: Vec<u8>,
    pub rgb_width: usize,
    pub rgb_height: usize,
    pub gt_keypoints: KeypointSet,
    pub gt_keypoints_rgb: KeypointSet,
    pub subject_id: u32,
    pub trial_id: u32,
    pub frame_index: u32,
    pub dropped: bool,
}

impl Frame {
    pub fn thermal_f64(&self) -> Vec<f64> {
        self.thermal.iter().map(|&v| v as f64).collect()
    }
}

/// Noise sources for one frame. `fixed_pattern` is shared by the dataset.
pub struct NoiseSource<'a> {
    pub fixed_pattern: &'a [f64],
    pub frame_seed: u64,
}

/// Per-pixel sensor offsets, unit variance; scaled at render time.
pub fn fixed_pattern(seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = Normal::new(0.0, 1.0).unwrap();
    (0..THERMAL_W * THERMAL_H).map(|_| n.sample(&mut rng)).collect()
}

struct Disk2 {
    a: (f64, f64),
    b: (f64, f64),
    r: f64,
    depth: f64,
    material: Material,
}

fn project_capsules(caps: &[Capsule], view: &View) -> Vec<Disk2> {
    let mut out: Vec<Disk2> = caps
        .iter()
        .filter_map(|c| {
            let (ua, va, da) = view.project(c.a)?;
            let (ub, vb, db) = view.project(c.b)?;
            let depth = 0.5 * (da + db);
            Some(Disk2 {
                a: (ua, va),
                b: (ub, vb),
                r: view.focal * c.radius / depth,
                depth,
                material: c.material,
            })
        })
        .collect();
    // Painter's order: farthest first. Stable so ties keep declaration order.
    out.sort_by(|p, q| q.depth.total_cmp(&p.depth));
    out
}

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (cx, cy) = (a.0 + t * dx, a.1 + t * dy);
    ((p.0 - cx).powi(2) + (p.1 - cy).powi(2)).sqrt()
}

/// Calls `paint(index, alpha)` for every pixel the primitive touches,
/// with a one-pixel linear edge ramp for anti-aliasing.
fn rasterize(d: &Disk2, width: usize, height: usize, mut paint: impl FnMut(usize, f64)) {
    let x0 = (d.a.0.min(d.b.0) - d.r - 1.0).floor().max(0.0) as usize;
    let y0 = (d.a.1.min(d.b.1) - d.r - 1.0).floor().max(0.0) as usize;
    let x1 = ((d.a.0.max(d.b.0) + d.r + 1.0).ceil().max(0.0) as usize).min(width);
    let y1 = ((d.a.1.max(d.b.1) + d.r + 1.0).ceil().max(0.0) as usize).min(height);
    for y in y0..y1 {
        for x in x0..x1 {
            let p = (x as f64 + 0.5, y as f64 + 0.5);
            let alpha = (d.r - segment_distance(p, d.a, d.b) + 0.5).clamp(0.0, 1.0);
            if alpha > 0.0 {
                paint(y * width + x, alpha);
            }
        }
    }
}

fn material_rgb(m: Material, s: &Subject) -> [f64; 3] {
    let mix = |a: [u8; 3], b: [u8; 3], t: f64| -> [f64; 3] {
        [0, 1, 2].map(|i| a[i] as f64 * (1.0 - t) + b[i] as f64 * t)
    };
    match m {
        Material::Shirt => mix(s.shirt_rgb, s.shirt_rgb, 0.0),
        Material::SleeveLeft => mix(s.shirt_rgb, [230, 70, 40], 0.55),
        Material::SleeveRight => mix(s.shirt_rgb, [40, 90, 230], 0.55),
        Material::PantsLeft => mix(s.pants_rgb, [150, 60, 30], 0.45),
        Material::PantsRight => mix(s.pants_rgb, [30, 70, 150], 0.45),
        Material::Skin => mix(s.skin_rgb, s.skin_rgb, 0.0),
        Material::Nose => mix(s.skin_rgb, [120, 40, 40], 0.35),
        Material::Hair => mix(s.hair_rgb, s.hair_rgb, 0.0),
        Material::Eye => [20.0, 20.0, 30.0],
        Material::Shoe => [35.0, 30.0, 30.0],
    }
}

fn hash2(x: u64, y: u64, seed: u64) -> f64 {
    let mut h = x.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ y.wrapping_mul(0xC2B2_AE3D_27D4_EB4F) ^ seed;
    h ^= h >> 31;
    h = h.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    h ^= h >> 29;
    (h >> 11) as f64 / (1u64 << 53) as f64
}

/// Wall-and-floor backdrop with a deterministic texture.
fn background_rgb(view: &View, texture_seed: u64) -> Vec<f64> {
    let mut img = vec![0.0; view.width * view.height * 3];
    for y in 0..view.height {
        for x in 0..view.width {
            let (u, v) = (x as f64 + 0.5, y as f64 + 0.5);
            let grain = hash2(x as u64, y as u64, texture_seed) - 0.5;
            let c = if v > view.cy + 0.5 {
                // Floor: project the pixel ray onto z = 0 for a perspective checkerboard.
                let depth = view.focal * view.camera_height / (v - view.cy);
                let wx = view.camera_x - depth;
                let wy = (u - view.cx) * depth / view.focal;
                let check = ((wx * 2.0).floor() + (wy * 2.0).floor()).rem_euclid(2.0);
                let base = 105.0 + 30.0 * check;
                [base + 8.0, base, base - 12.0]
            } else {
                let stripe = ((u / view.width as f64 * 9.0).floor() % 2.0) * 10.0;
                [170.0 + stripe, 176.0 + stripe, 160.0]
            };
            for ch in 0..3 {
                img[(y * view.width + x) * 3 + ch] = c[ch] + 22.0 * grain;
            }
        }
    }
    img
}

pub fn render_rgb(skel: &Skeleton, subject: &Subject, camera: &CameraConfig, texture_seed: u64) -> Vec<u8> {
    let view = camera.rgb_view();
    let mut img = background_rgb(&view, texture_seed);
    for d in project_capsules(&skel.capsules(), &view) {
        let col = material_rgb(d.material, subject);
        rasterize(&d, view.width, view.height, |i, a| {
            for ch in 0..3 {
                let p = &mut img[i * 3 + ch];
                *p = *p * (1.0 - a) + col[ch] * a;
            }
        });
    }
    img.iter().map(|v| v.round().clamp(0.0, 255.0) as u8).collect()
}

/// Noise-free thermal radiance image (sensor units, before quantization).
pub fn render_thermal_clean(skel: &Skeleton, subject: &Subject, camera: &CameraConfig) -> Vec<f64> {
    let view = camera.thermal_view();
    let mut img = vec![camera.ambient; THERMAL_W * THERMAL_H];
    for d in project_capsules(&skel.capsules(), &view) {
        let level = camera.ambient + subject.body_temp_offset * d.material.thermal_gain();
        rasterize(&d, view.width, view.height, |i, a| {
            img[i] = img[i] * (1.0 - a) + level * a;
        });
    }
    img
}

pub fn render_thermal(skel: &Skeleton, subject: &Subject, camera: &CameraConfig, noise: &NoiseSource) -> Vec<u16> {
    let mut img = render_thermal_clean(skel, subject, camera);
    let fpn = camera.fixed_pattern_sigma * camera.nominal_contrast;
    let sigma = camera.noise_sigma * camera.nominal_contrast;
    let mut rng = ChaCha8Rng::seed_from_u64(noise.frame_seed);
    let n = Normal::new(0.0, 1.0).unwrap();
    for (i, p) in img.iter_mut().enumerate() {
        let offset = noise.fixed_pattern.get(i).copied().unwrap_or(0.0) * fpn;
        let temporal = n.sample(&mut rng);
        *p += offset + if sigma > 0.0 { sigma * temporal } else { 0.0 };
    }
    img.iter().map(|v| v.round().clamp(0.0, u16::MAX as f64) as u16).collect()
}

/// Renders both views and ground truth for one pose.
pub fn render_frame(pose: &TugPose, subject: &Subject, camera: &CameraConfig, noise: &NoiseSource, texture_seed: u64) -> Frame {
    let skel = Skeleton::from_pose(pose, subject);
    Frame {
        thermal: render_thermal(&skel, subject, camera, noise),
        rgb: render_rgb(&skel, subject, camera, texture_seed),
        rgb_width: camera.rgb_width,
        rgb_height: camera.rgb_height,
        gt_keypoints: camera.thermal_view().keypoints(&skel, CoordFrame::Thermal),
        gt_keypoints_rgb: camera.rgb_view().keypoints(&skel, CoordFrame::Rgb),
        subject_id: subject.id,
        trial_id: 0,
        frame_index: 0,
        dropped: false,
    }
}

/// Pixels the figure covers by at least half in the clean thermal render.
pub fn body_mask(skel: &Skeleton, camera: &CameraConfig) -> Vec<bool> {
    let view = camera.thermal_view();
    let mut cover = vec![0.0f64; THERMAL_W * THERMAL_H];
    for d in project_capsules(&skel.capsules(), &view) {
        rasterize(&d, view.width, view.height, |i, a| cover[i] = cover[i].max(a));
    }
    cover.iter().map(|&c| c >= 0.5).collect()
}
