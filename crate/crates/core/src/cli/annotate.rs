//! Overlay rendering for thermal frames.

use crate::evalkit::Prediction;
use crate::keypoints::SKELETON;
use crate::synthtug::{Frame, THERMAL_H, THERMAL_W};

pub const UPSCALE: usize = 4;
pub const OUT_W: usize = THERMAL_W * UPSCALE;
pub const OUT_H: usize = THERMAL_H * UPSCALE;
pub const BANNER_ROWS: usize = 9;

const HIGH: [u8; 3] = [40, 220, 60];
const MID: [u8; 3] = [250, 210, 30];
const LOW: [u8; 3] = [230, 40, 40];
const BONE: [u8; 3] = [60, 160, 255];

/// Marker color by decoded confidence.
pub fn tier_color(confidence: f64) -> [u8; 3] {
    if confidence >= 0.5 {
        HIGH
    } else if confidence >= 0.2 {
        MID
    } else {
        LOW
    }
}

struct Canvas {
    rgb: Vec<u8>,
}

impl Canvas {
    fn put(&mut self, x: i64, y: i64, c: [u8; 3]) {
        if (0..OUT_W as i64).contains(&x) && (0..OUT_H as i64).contains(&y) {
            let i = 3 * (y as usize * OUT_W + x as usize);
            self.rgb[i..i + 3].copy_from_slice(&c);
        }
    }

    fn line(&mut self, (mut x0, mut y0): (i64, i64), (x1, y1): (i64, i64), c: [u8; 3]) {
        let (dx, dy) = ((x1 - x0).abs(), -(y1 - y0).abs());
        let (sx, sy) = ((x1 - x0).signum(), (y1 - y0).signum());
        let mut err = dx + dy;
        loop {
            self.put(x0, y0, c);
            if x0 == x1 && y0 == y1 {
                break;
            }
            let e2 = 2 * err;
            if e2 >= dy {
                err += dy;
                x0 += sx;
            }
            if e2 <= dx {
                err += dx;
                y0 += sy;
            }
        }
    }
}

/// 3×5 glyphs, one row per entry, high bit leftmost.
fn glyph(ch: char) -> [u8; 5] {
    match ch {
        'N' => [0b101, 0b111, 0b111, 0b111, 0b101],
        'O' => [0b111, 0b101, 0b101, 0b101, 0b111],
        'P' => [0b111, 0b101, 0b111, 0b100, 0b100],
        'E' => [0b111, 0b100, 0b111, 0b100, 0b111],
        'R' => [0b110, 0b101, 0b110, 0b101, 0b101],
        'S' => [0b111, 0b100, 0b111, 0b001, 0b111],
        _ => [0; 5],
    }
}

/// Output pixel holding thermal coordinate `(x, y)`.
pub fn to_output_pixel(x: f64, y: f64) -> (i64, i64) {
    ((x * UPSCALE as f64).floor() as i64, (y * UPSCALE as f64).floor() as i64)
}

/// 320×240 interleaved RGB: the thermal frame min-max scaled to gray and
/// upsampled ×4, with skeleton and keypoint markers on top. `None` draws the
/// "no person" banner instead.
pub fn render_annotation(frame: &Frame, prediction: Option<&Prediction>) -> Vec<u8> {
    let lo = *frame.thermal.iter().min().unwrap_or(&0) as f64;
    let hi = *frame.thermal.iter().max().unwrap_or(&0) as f64;
    let span = (hi - lo).max(1.0);
    let mut canvas = Canvas { rgb: vec![0; OUT_W * OUT_H * 3] };
    for y in 0..OUT_H {
        for x in 0..OUT_W {
            let v = frame.thermal[(y / UPSCALE) * THERMAL_W + x / UPSCALE] as f64;
            let g = ((v - lo) / span * 255.0).round() as u8;
            canvas.put(x as i64, y as i64, [g, g, g]);
        }
    }
    match prediction {
        Some(p) => {
            let pts = &p.keypoints.points;
            for &(a, b) in SKELETON.iter() {
                if pts[a].is_visible() && pts[b].is_visible() {
                    canvas.line(to_output_pixel(pts[a].x, pts[a].y), to_output_pixel(pts[b].x, pts[b].y), BONE);
                }
            }
            for (k, kp) in pts.iter().enumerate().filter(|(_, kp)| kp.is_visible()) {
                let (cx, cy) = to_output_pixel(kp.x, kp.y);
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        canvas.put(cx + dx, cy + dy, tier_color(p.confidences[k]));
                    }
                }
            }
        }
        None => {
            for y in 0..BANNER_ROWS {
                for x in 0..OUT_W {
                    canvas.put(x as i64, y as i64, LOW);
                }
            }
            for (i, ch) in "NO PERSON".chars().enumerate() {
                let rows = glyph(ch);
                for (r, bits) in rows.iter().enumerate() {
                    for c in 0..3 {
                        if bits >> (2 - c) & 1 == 1 {
                            canvas.put(2 + 4 * i as i64 + c, 2 + r as i64, [255, 255, 255]);
                        }
                    }
                }
            }
        }
    }
    canvas.rgb
}
