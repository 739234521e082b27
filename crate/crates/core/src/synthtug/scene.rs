//! Forward kinematics and pinhole projection shared by both camera views.

use super::motion::TugPose;
use super::subject::{Subject, ANKLE_HEIGHT, NECK_RATIO};
use crate::keypoints::{CoordFrame, Keypoint, KeypointSet, NUM_KEYPOINTS};
use serde::{Deserialize, Serialize};

pub const THERMAL_W: usize = 80;
pub const THERMAL_H: usize = 60;

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
    fn scale(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
    fn axpy(self, s: f64, o: Vec3) -> Vec3 {
        self.add(o.scale(s))
    }
}

/// Body materials; they select RGB colors and thermal emissivity.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Material {
    Shirt,
    SleeveLeft,
    SleeveRight,
    PantsLeft,
    PantsRight,
    Skin,
    Hair,
    Eye,
    Nose,
    Shoe,
}

impl Material {
    /// Surface temperature relative to the subject's body offset.
    pub fn thermal_gain(self) -> f64 {
        match self {
            Material::Shirt | Material::SleeveLeft | Material::SleeveRight => 0.92,
            Material::PantsLeft | Material::PantsRight => 0.88,
            Material::Skin | Material::Nose => 1.25,
            Material::Eye => 1.3,
            Material::Hair => 0.68,
            Material::Shoe => 0.6,
        }
    }
}

/// A 3-D capsule (segment swept by a sphere); `a == b` gives a sphere.
#[derive(Clone, Copy, Debug)]
pub struct Capsule {
    pub a: Vec3,
    pub b: Vec3,
    pub radius: f64,
    pub material: Material,
}

/// All 3-D points of the figure for one pose.
#[derive(Clone, Debug)]
pub struct Skeleton {
    /// COCO-ordered joints.
    pub joints: [Vec3; NUM_KEYPOINTS],
    pub pelvis: Vec3,
    pub shoulder_center: Vec3,
    pub neck_top: Vec3,
    pub head_center: Vec3,
    pub head_forward: Vec3,
    pub head_radius: f64,
    pub hands: [Vec3; 2],
    pub toes: [Vec3; 2],
}

impl Skeleton {
    pub fn from_pose(pose: &TugPose, subject: &Subject) -> Self {
        let l = &subject.limb_lengths;
        let ang = &pose.joint_angles;
        let (sh, ch) = pose.heading.sin_cos();
        let fwd = Vec3::new(ch, sh, 0.0);
        let left = Vec3::new(-sh, ch, 0.0);
        let up = Vec3::new(0.0, 0.0, 1.0);
        let side = [1.0, -1.0];

        // Legs relative to a pelvis at height 0, then ground the lower ankle.
        let rel = Vec3::new(pose.root_position.0, pose.root_position.1, 0.0);
        let mut hips = [Vec3::default(); 2];
        let mut knees = [Vec3::default(); 2];
        let mut ankles = [Vec3::default(); 2];
        for i in 0..2 {
            hips[i] = rel.axpy(side[i] * subject.hip_width / 2.0, left);
            let th = ang.hip_flex[i];
            let thigh = fwd.scale(th.sin()).axpy(-th.cos(), up);
            knees[i] = hips[i].axpy(l.upper_leg, thigh);
            let sa = th - ang.knee_flex[i];
            let shank = fwd.scale(sa.sin()).axpy(-sa.cos(), up);
            ankles[i] = knees[i].axpy(l.lower_leg, shank);
        }
        let lowest = ankles[0].z.min(ankles[1].z);
        let lift = Vec3::new(0.0, 0.0, ANKLE_HEIGHT - lowest);
        let pelvis = rel.add(lift);
        for p in hips.iter_mut().chain(knees.iter_mut()).chain(ankles.iter_mut()) {
            *p = p.add(lift);
        }

        let tp = ang.torso_pitch;
        let trunk = fwd.scale(tp.sin()).axpy(tp.cos(), up);
        let shoulder_center = pelvis.axpy(l.torso, trunk);
        let hp = tp + ang.head_pitch;
        let head_up = fwd.scale(hp.sin()).axpy(hp.cos(), up);
        let head_forward = fwd.scale(hp.cos()).axpy(-hp.sin(), up);
        let neck_top = shoulder_center.axpy(l.torso * NECK_RATIO, head_up);
        let head_center = neck_top.axpy(l.head_radius, head_up);
        let r = l.head_radius;

        let mut shoulders = [Vec3::default(); 2];
        let mut elbows = [Vec3::default(); 2];
        let mut wrists = [Vec3::default(); 2];
        let mut hands = [Vec3::default(); 2];
        for i in 0..2 {
            shoulders[i] = shoulder_center.axpy(side[i] * subject.shoulder_width / 2.0, left);
            let ab = ang.arm_abduction[i];
            let s1 = ang.shoulder_flex[i] + tp;
            let d1 = fwd.scale(s1.sin()).axpy(-s1.cos(), up).scale(ab.cos()).axpy(side[i] * ab.sin(), left);
            elbows[i] = shoulders[i].axpy(l.upper_arm, d1);
            let s2 = s1 + ang.elbow_flex[i];
            let d2 = fwd.scale(s2.sin()).axpy(-s2.cos(), up).scale(ab.cos()).axpy(side[i] * ab.sin(), left);
            wrists[i] = elbows[i].axpy(l.lower_arm, d2);
            hands[i] = wrists[i].axpy(0.07, d2);
        }
        let toes = [0, 1].map(|i| ankles[i].axpy(0.15, fwd).axpy(-0.05, up));

        let face = |f: f64, u: f64, s: f64| head_center.axpy(r * f, head_forward).axpy(r * u, head_up).axpy(r * s, left);
        let joints = [
            face(1.0, 0.0, 0.0),
            face(0.80, 0.32, 0.38),
            face(0.80, 0.32, -0.38),
            face(-0.05, 0.12, 0.98),
            face(-0.05, 0.12, -0.98),
            shoulders[0],
            shoulders[1],
            elbows[0],
            elbows[1],
            wrists[0],
            wrists[1],
            hips[0],
            hips[1],
            knees[0],
            knees[1],
            ankles[0],
            ankles[1],
        ];
        Self {
            joints,
            pelvis,
            shoulder_center,
            neck_top,
            head_center,
            head_forward,
            head_radius: r,
            hands,
            toes,
        }
    }

    /// Renderable primitives; the figure is drawn back-to-front from these.
    pub fn capsules(&self) -> Vec<Capsule> {
        use Material::*;
        let j = &self.joints;
        let r = self.head_radius;
        let cap = |a: Vec3, b: Vec3, radius: f64, material: Material| Capsule { a, b, radius, material };
        let ball = |a: Vec3, radius: f64, material: Material| Capsule { a, b: a, radius, material };
        let hip_mid = j[11].add(j[12]).scale(0.5);
        vec![
            cap(hip_mid, self.shoulder_center.axpy(-0.06, Vec3::new(0.0, 0.0, 1.0)), 0.14, Shirt),
            cap(j[5], j[6], 0.075, Shirt),
            cap(j[11], j[12], 0.095, PantsLeft),
            cap(self.shoulder_center, self.neck_top, 0.05, Skin),
            ball(self.head_center, r, Hair),
            ball(self.head_center.axpy(0.5 * r, self.head_forward), 0.74 * r, Skin),
            ball(j[0], 0.18 * r, Nose),
            ball(j[1], 0.15 * r, Eye),
            ball(j[2], 0.15 * r, Eye),
            ball(j[3], 0.22 * r, Skin),
            ball(j[4], 0.22 * r, Skin),
            cap(j[5], j[7], 0.048, SleeveLeft),
            cap(j[6], j[8], 0.048, SleeveRight),
            cap(j[7], j[9], 0.04, Skin),
            cap(j[8], j[10], 0.04, Skin),
            cap(j[9], self.hands[0], 0.042, Skin),
            cap(j[10], self.hands[1], 0.042, Skin),
            cap(j[11], j[13], 0.075, PantsLeft),
            cap(j[12], j[14], 0.075, PantsRight),
            cap(j[13], j[15], 0.055, PantsLeft),
            cap(j[14], j[16], 0.055, PantsRight),
            cap(j[15], self.toes[0], 0.045, Shoe),
            cap(j[16], self.toes[1], 0.045, Shoe),
        ]
    }
}

/// Shared pinhole rig: the thermal sensor and the RGB camera have a common
/// optical center looking back down the track toward the chair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraConfig {
    pub rgb_width: usize,
    pub rgb_height: usize,
    /// Thermal focal length in thermal pixels.
    pub focal_thermal: f64,
    /// Camera position along the track (the chair sits at x = 0).
    pub camera_x: f64,
    pub camera_height: f64,
    /// Scene background level in sensor units.
    pub ambient: f64,
    /// Nominal body-minus-ambient contrast used to scale the noise terms.
    pub nominal_contrast: f64,
    /// Temporal Gaussian noise, as a fraction of `nominal_contrast`.
    pub noise_sigma: f64,
    /// Fixed-pattern offset spread, as a fraction of `nominal_contrast`.
    pub fixed_pattern_sigma: f64,
}

impl Default for CameraConfig {
    fn default() -> Self {
        Self {
            rgb_width: 320,
            rgb_height: 240,
            focal_thermal: 70.0,
            camera_x: 5.5,
            camera_height: 1.0,
            ambient: 3000.0,
            nominal_contrast: 800.0,
            noise_sigma: 0.02,
            fixed_pattern_sigma: 0.01,
        }
    }
}

/// Affine map between thermal and RGB pixel coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraRelation {
    pub scale: f64,
    pub thermal_center: (f64, f64),
    pub rgb_center: (f64, f64),
}

impl CameraRelation {
    pub fn thermal_to_rgb(&self, x: f64, y: f64) -> (f64, f64) {
        (
            (x - self.thermal_center.0) * self.scale + self.rgb_center.0,
            (y - self.thermal_center.1) * self.scale + self.rgb_center.1,
        )
    }

    pub fn rgb_to_thermal(&self, x: f64, y: f64) -> (f64, f64) {
        (
            (x - self.rgb_center.0) / self.scale + self.thermal_center.0,
            (y - self.rgb_center.1) / self.scale + self.thermal_center.1,
        )
    }
}

/// One pinhole view.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct View {
    pub width: usize,
    pub height: usize,
    pub focal: f64,
    pub cx: f64,
    pub cy: f64,
    pub camera_x: f64,
    pub camera_height: f64,
}

impl View {
    /// Projects a world point; `None` behind the camera.
    pub fn project(&self, p: Vec3) -> Option<(f64, f64, f64)> {
        let depth = self.camera_x - p.x;
        if depth <= 1e-6 {
            return None;
        }
        let u = self.cx + self.focal * p.y / depth;
        let v = self.cy - self.focal * (p.z - self.camera_height) / depth;
        Some((u, v, depth))
    }

    pub fn contains(&self, u: f64, v: f64) -> bool {
        u >= 0.0 && v >= 0.0 && u < self.width as f64 && v < self.height as f64
    }

    pub fn keypoints(&self, skel: &Skeleton, frame: CoordFrame) -> KeypointSet {
        let points = skel.joints.map(|j| match self.project(j) {
            Some((u, v, _)) if self.contains(u, v) => Keypoint::new(u, v, 2),
            Some((u, v, _)) => Keypoint::new(u, v, 0),
            None => Keypoint::new(0.0, 0.0, 0),
        });
        KeypointSet::new(frame, points)
    }
}

impl CameraConfig {
    pub fn thermal_view(&self) -> View {
        View {
            width: THERMAL_W,
            height: THERMAL_H,
            focal: self.focal_thermal,
            cx: THERMAL_W as f64 / 2.0,
            cy: THERMAL_H as f64 / 2.0,
            camera_x: self.camera_x,
            camera_height: self.camera_height,
        }
    }

    pub fn rgb_scale(&self) -> f64 {
        self.rgb_width as f64 / THERMAL_W as f64
    }

    pub fn rgb_view(&self) -> View {
        View {
            width: self.rgb_width,
            height: self.rgb_height,
            focal: self.focal_thermal * self.rgb_scale(),
            cx: self.rgb_width as f64 / 2.0,
            cy: self.rgb_height as f64 / 2.0,
            camera_x: self.camera_x,
            camera_height: self.camera_height,
        }
    }

    pub fn relation(&self) -> CameraRelation {
        CameraRelation {
            scale: self.rgb_scale(),
            thermal_center: (THERMAL_W as f64 / 2.0, THERMAL_H as f64 / 2.0),
            rgb_center: (self.rgb_width as f64 / 2.0, self.rgb_height as f64 / 2.0),
        }
    }
}
