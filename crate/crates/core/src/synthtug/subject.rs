use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Segment lengths in meters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimbLengths {
    pub torso: f64,
    pub upper_arm: f64,
    pub lower_arm: f64,
    pub upper_leg: f64,
    pub lower_leg: f64,
    pub head_radius: f64,
}

impl LimbLengths {
    pub fn all(&self) -> [f64; 6] {
        [
            self.torso,
            self.upper_arm,
            self.lower_arm,
            self.upper_leg,
            self.lower_leg,
            self.head_radius,
        ]
    }
}

/// Ankle joint height above the floor.
pub const ANKLE_HEIGHT: f64 = 0.08;
/// Neck length as a fraction of torso length.
pub const NECK_RATIO: f64 = 0.2;

/// A synthetic participant. Appearance fields only affect rendering.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Subject {
    pub id: u32,
    pub limb_lengths: LimbLengths,
    pub height: f64,
    pub shoulder_width: f64,
    pub hip_width: f64,
    /// Steps per second while walking.
    pub gait_cadence: f64,
    /// Body surface temperature above ambient, in sensor units.
    pub body_temp_offset: f64,
    pub shirt_rgb: [u8; 3],
    pub pants_rgb: [u8; 3],
    pub skin_rgb: [u8; 3],
    pub hair_rgb: [u8; 3],
}

impl Subject {
    /// Standing height implied by the vertical segment chain.
    pub fn segment_height(l: &LimbLengths) -> f64 {
        ANKLE_HEIGHT + l.lower_leg + l.upper_leg + l.torso * (1.0 + NECK_RATIO) + 2.0 * l.head_radius
    }
}

/// Deterministic adult-proportioned subject drawn from `seed`.
pub fn sample_subject(seed: u64) -> Subject {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5u64.rotate_left(40));
    let build: f64 = rng.random_range(0.92..1.08);
    let mut jitter = |base: f64| -> f64 { (base * build * rng.random_range(0.95..1.05)).clamp(0.06, 0.95) };
    let limb_lengths = LimbLengths {
        torso: jitter(0.54),
        upper_arm: jitter(0.30),
        lower_arm: jitter(0.27),
        upper_leg: jitter(0.45),
        lower_leg: jitter(0.43),
        head_radius: jitter(0.105),
    };
    let height = Subject::segment_height(&limb_lengths);
    let shoulder_width = limb_lengths.torso * rng.random_range(0.68..0.80);
    let hip_width = limb_lengths.torso * rng.random_range(0.40..0.50);
    let gait_cadence = rng.random_range(1.7..2.1);
    let body_temp_offset = rng.random_range(700.0..900.0);
    let tone: f64 = rng.random_range(0.55..1.0);
    let mut color = |lo: u8, hi: u8| -> [u8; 3] { [rng.random_range(lo..hi), rng.random_range(lo..hi), rng.random_range(lo..hi)] };
    let shirt_rgb = color(40, 220);
    let pants_rgb = color(20, 120);
    let skin_rgb = [(235.0 * tone) as u8, (190.0 * tone) as u8, (160.0 * tone) as u8];
    let hair_rgb = color(10, 90);
    Subject {
        id: 0,
        limb_lengths,
        height,
        shoulder_width,
        hip_width,
        gait_cadence,
        body_temp_offset,
        shirt_rgb,
        pants_rgb,
        skin_rgb,
        hair_rgb,
    }
}
