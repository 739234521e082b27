//! Keyframed Timed-Up-and-Go kinematics.

use super::subject::Subject;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Track length walked before turning.
pub const TRACK_LENGTH: f64 = 3.0;
/// Pelvis x once standing clear of the chair.
const STAND_X: f64 = 0.3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Sit,
    Rise,
    WalkOut,
    Turn,
    WalkBack,
    Descend,
    SitEnd,
}

impl Phase {
    pub const ALL: [Phase; 7] = [
        Phase::Sit,
        Phase::Rise,
        Phase::WalkOut,
        Phase::Turn,
        Phase::WalkBack,
        Phase::Descend,
        Phase::SitEnd,
    ];
}

/// Joint angles in radians; `[left, right]` pairs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct JointAngles {
    /// Forward lean of the trunk from vertical.
    pub torso_pitch: f64,
    /// Head pitch relative to the trunk (positive nods forward).
    pub head_pitch: f64,
    pub hip_flex: [f64; 2],
    pub knee_flex: [f64; 2],
    pub shoulder_flex: [f64; 2],
    pub elbow_flex: [f64; 2],
    pub arm_abduction: [f64; 2],
}

impl JointAngles {
    fn seated() -> Self {
        Self {
            torso_pitch: (-4f64).to_radians(),
            head_pitch: 4f64.to_radians(),
            hip_flex: [88f64.to_radians(); 2],
            knee_flex: [90f64.to_radians(); 2],
            shoulder_flex: [12f64.to_radians(); 2],
            elbow_flex: [55f64.to_radians(); 2],
            arm_abduction: [10f64.to_radians(); 2],
        }
    }

    fn swapped(&self) -> Self {
        let sw = |a: [f64; 2]| [a[1], a[0]];
        Self {
            hip_flex: sw(self.hip_flex),
            knee_flex: sw(self.knee_flex),
            shoulder_flex: sw(self.shoulder_flex),
            elbow_flex: sw(self.elbow_flex),
            arm_abduction: sw(self.arm_abduction),
            ..*self
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TugPose {
    pub phase: Phase,
    pub joint_angles: JointAngles,
    /// Pelvis ground position: x along the track, y lateral (positive to
    /// the subject's left when facing the camera).
    pub root_position: (f64, f64),
    /// Facing direction in radians; 0 faces down the track toward the camera.
    pub heading: f64,
    pub time: f64,
}

impl TugPose {
    /// The same pose mirrored about the track axis.
    pub fn mirrored(&self) -> Self {
        Self {
            joint_angles: self.joint_angles.swapped(),
            root_position: (self.root_position.0, -self.root_position.1),
            heading: -self.heading,
            ..*self
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotionConfig {
    pub duration_s: f64,
    pub fps: u32,
}

impl Default for MotionConfig {
    fn default() -> Self {
        Self { duration_s: 10.0, fps: 8 }
    }
}

/// Per-trial timing and style drawn from the trial seed.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialPlan {
    /// Phase start times; `bounds[i]..bounds[i+1]` is `Phase::ALL[i]`.
    pub bounds: [f64; 8],
    pub gait_phase0: f64,
    pub stride_amp: f64,
    pub arm_amp: f64,
    pub rise_lean: f64,
    pub turn_side: f64,
    pub cadence: f64,
}

impl TrialPlan {
    pub fn new(subject: &Subject, trial_seed: u64, duration: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(trial_seed ^ 0x7u64.rotate_left(52));
        let base = [0.08, 0.12, 0.24, 0.12, 0.32, 0.10];
        let mut frac: Vec<f64> = base.iter().map(|b| b * rng.random_range(0.88..1.12)).collect();
        let total: f64 = frac.iter().sum();
        if total > 0.97 {
            frac.iter_mut().for_each(|f| *f *= 0.97 / total);
        }
        let mut bounds = [0.0; 8];
        for i in 0..6 {
            bounds[i + 1] = bounds[i] + frac[i] * duration;
        }
        bounds[7] = duration;
        Self {
            bounds,
            gait_phase0: rng.random_range(0.0..2.0 * PI),
            stride_amp: rng.random_range(0.85..1.15),
            arm_amp: rng.random_range(0.6..1.3),
            rise_lean: rng.random_range(26f64..40.0).to_radians(),
            turn_side: if rng.random_bool(0.5) { 1.0 } else { -1.0 },
            cadence: subject.gait_cadence * rng.random_range(0.95..1.05),
        }
    }

    fn phase_at(&self, t: f64) -> (Phase, f64) {
        for (i, p) in Phase::ALL.iter().enumerate() {
            let (a, b) = (self.bounds[i], self.bounds[i + 1]);
            if t < b || i == 6 {
                let s = if b > a { ((t - a) / (b - a)).clamp(0.0, 1.0) } else { 1.0 };
                return (*p, s);
            }
        }
        unreachable!()
    }

    fn gait(&self, t: f64, amp: f64) -> JointAngles {
        let phi = 2.0 * PI * (self.cadence / 2.0) * t + self.gait_phase0;
        let a = amp * self.stride_amp;
        let d = f64::to_radians;
        let leg = |off: f64| -> (f64, f64) {
            let p = phi + off;
            let hip = d(3.0) + a * d(22.0) * p.sin();
            let knee = d(6.0) + a * d(34.0) * p.cos().max(0.0);
            (hip, knee)
        };
        let (hl, kl) = leg(0.0);
        let (hr, kr) = leg(PI);
        let arm = amp * self.arm_amp * d(18.0) * phi.sin();
        JointAngles {
            torso_pitch: d(4.0) * amp.min(1.0),
            head_pitch: d(-2.0),
            hip_flex: [hl, hr],
            knee_flex: [kl, kr],
            shoulder_flex: [-arm, arm],
            elbow_flex: [d(18.0) + arm.abs() * 0.4; 2],
            arm_abduction: [d(7.0); 2],
        }
    }

    fn transition(&self, u: f64) -> JointAngles {
        // u = 0 seated, u = 1 standing
        let seated = JointAngles::seated();
        let stand = self.gait(0.0, 0.0);
        let mut j = lerp_angles(&seated, &stand, u);
        j.torso_pitch += self.rise_lean * (PI * u).sin();
        j.shoulder_flex = [j.shoulder_flex[0] + 0.5 * self.rise_lean * (PI * u).sin(); 2];
        j.head_pitch -= 0.4 * self.rise_lean * (PI * u).sin();
        j
    }

    pub fn pose_at(&self, t: f64) -> TugPose {
        let (phase, s) = self.phase_at(t);
        let (joint_angles, x, y, heading) = match phase {
            Phase::Sit | Phase::SitEnd => (JointAngles::seated(), 0.0, 0.0, 0.0),
            Phase::Rise => {
                let u = smoothstep(s);
                (self.transition(u), STAND_X * u, 0.0, 0.0)
            }
            Phase::WalkOut => {
                let e = ease(s);
                let amp = walk_envelope(s);
                (self.gait(t, amp), STAND_X + (TRACK_LENGTH - STAND_X) * e, 0.0, 0.0)
            }
            Phase::Turn => {
                let u = smoothstep(s);
                let bulge = (PI * s).sin();
                (
                    self.gait(t, 0.5),
                    TRACK_LENGTH - 0.04 * bulge,
                    self.turn_side * 0.1 * bulge,
                    PI * u,
                )
            }
            Phase::WalkBack => {
                const WALK: f64 = 0.78;
                if s < WALK {
                    let s2 = s / WALK;
                    let amp = walk_envelope(s2).max(0.4);
                    (
                        self.gait(t, amp),
                        TRACK_LENGTH - (TRACK_LENGTH - STAND_X) * ease(s2),
                        0.0,
                        PI,
                    )
                } else {
                    let s3 = (s - WALK) / (1.0 - WALK);
                    (self.gait(t, 0.4), STAND_X, 0.0, PI + PI * smoothstep(s3))
                }
            }
            Phase::Descend => {
                let u = 1.0 - smoothstep(s);
                (self.transition(u), STAND_X * u, 0.0, 0.0)
            }
        };
        TugPose {
            phase,
            joint_angles,
            root_position: (x, y),
            heading: normalize_heading(heading),
            time: t,
        }
    }
}

/// Poses sampled at `1/fps` spacing over the configured trial duration.
pub fn simulate_tug(subject: &Subject, trial_seed: u64, fps: u32) -> Vec<TugPose> {
    simulate_tug_with(subject, trial_seed, &MotionConfig { fps, ..MotionConfig::default() })
}

pub fn simulate_tug_with(subject: &Subject, trial_seed: u64, cfg: &MotionConfig) -> Vec<TugPose> {
    assert!(cfg.fps >= 1, "fps must be at least 1");
    let plan = TrialPlan::new(subject, trial_seed, cfg.duration_s);
    let n = (cfg.duration_s * cfg.fps as f64).round() as usize;
    (0..n).map(|i| plan.pose_at(i as f64 / cfg.fps as f64)).collect()
}

fn normalize_heading(h: f64) -> f64 {
    let mut h = h % (2.0 * PI);
    if h > PI {
        h -= 2.0 * PI;
    }
    if h.abs() < 1e-12 {
        0.0
    } else {
        h
    }
}

fn smoothstep(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * (3.0 - 2.0 * s)
}

/// Walking progress: gentle start and stop around a constant-speed middle.
fn ease(s: f64) -> f64 {
    0.5 * (s + smoothstep(s))
}

/// Gait amplitude ramp at the start and end of a walking segment.
fn walk_envelope(s: f64) -> f64 {
    let r = 0.12;
    if s < r {
        0.4 + 0.6 * s / r
    } else if s > 1.0 - r {
        0.4 + 0.6 * (1.0 - s) / r
    } else {
        1.0
    }
}

fn lerp_angles(a: &JointAngles, b: &JointAngles, u: f64) -> JointAngles {
    let l = |x: f64, y: f64| x + (y - x) * u;
    let l2 = |x: [f64; 2], y: [f64; 2]| [l(x[0], y[0]), l(x[1], y[1])];
    JointAngles {
        torso_pitch: l(a.torso_pitch, b.torso_pitch),
        head_pitch: l(a.head_pitch, b.head_pitch),
        hip_flex: l2(a.hip_flex, b.hip_flex),
        knee_flex: l2(a.knee_flex, b.knee_flex),
        shoulder_flex: l2(a.shoulder_flex, b.shoulder_flex),
        elbow_flex: l2(a.elbow_flex, b.elbow_flex),
        arm_abduction: l2(a.arm_abduction, b.arm_abduction),
    }
}
