//! COCO 17-keypoint conventions and the [`KeypointSet`] container.

use serde::{Deserialize, Serialize};

pub const NUM_KEYPOINTS: usize = 17;

pub const COCO_NAMES: [&str; NUM_KEYPOINTS] = [
    "nose",
    "left_eye",
    "right_eye",
    "left_ear",
    "right_ear",
    "left_shoulder",
    "right_shoulder",
    "left_elbow",
    "right_elbow",
    "left_wrist",
    "right_wrist",
    "left_hip",
    "right_hip",
    "left_knee",
    "right_knee",
    "left_ankle",
    "right_ankle",
];

/// The 19 standard COCO limb connections, zero-based.
pub const SKELETON: [(usize, usize); 19] = [
    (15, 13),
    (13, 11),
    (16, 14),
    (14, 12),
    (11, 12),
    (5, 11),
    (6, 12),
    (5, 6),
    (5, 7),
    (6, 8),
    (7, 9),
    (8, 10),
    (1, 2),
    (0, 1),
    (0, 2),
    (1, 3),
    (2, 4),
    (3, 5),
    (4, 6),
];

/// Index of the left/right counterpart; the nose maps to itself.
pub const fn mirror_index(i: usize) -> usize {
    match i {
        0 => 0,
        i if i % 2 == 1 => i + 1,
        i => i - 1,
    }
}

/// Coordinate frame a keypoint set is expressed in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoordFrame {
    Thermal,
    Rgb,
    Crop,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    /// COCO visibility flag: 0 unlabeled, 1 labeled but hidden, 2 visible.
    pub v: u8,
}

impl Keypoint {
    pub fn new(x: f64, y: f64, v: u8) -> Self {
        Self { x, y, v }
    }

    pub fn is_visible(&self) -> bool {
        self.v > 0
    }
}

impl From<[f64; 3]> for Keypoint {
    fn from(a: [f64; 3]) -> Self {
        Self { x: a[0], y: a[1], v: a[2] as u8 }
    }
}

impl From<Keypoint> for [f64; 3] {
    fn from(k: Keypoint) -> Self {
        [k.x, k.y, k.v as f64]
    }
}

/// Seventeen COCO-ordered keypoints in one coordinate frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KeypointSet {
    pub frame: CoordFrame,
    pub points: [Keypoint; NUM_KEYPOINTS],
}

impl KeypointSet {
    pub fn new(frame: CoordFrame, points: [Keypoint; NUM_KEYPOINTS]) -> Self {
        Self { frame, points }
    }

    pub fn invisible(frame: CoordFrame) -> Self {
        Self::new(frame, [Keypoint::default(); NUM_KEYPOINTS])
    }

    pub fn visible_count(&self) -> usize {
        self.points.iter().filter(|k| k.is_visible()).count()
    }

    /// Tight box `[x0, y0, x1, y1]` around visible keypoints.
    pub fn visible_bounds(&self) -> Option<[f64; 4]> {
        let mut it = self.points.iter().filter(|k| k.is_visible());
        let first = it.next()?;
        let mut b = [first.x, first.y, first.x, first.y];
        for k in it {
            b[0] = b[0].min(k.x);
            b[1] = b[1].min(k.y);
            b[2] = b[2].max(k.x);
            b[3] = b[3].max(k.y);
        }
        Some(b)
    }

    /// Applies `f` to every coordinate, keeping visibility.
    pub fn map_coords(&self, frame: CoordFrame, f: impl Fn(f64, f64) -> (f64, f64)) -> Self {
        let mut points = self.points;
        for p in &mut points {
            let (x, y) = f(p.x, p.y);
            p.x = x;
            p.y = y;
        }
        Self { frame, points }
    }
}
