//! Finds the person in a thermal frame and prepares network inputs for both
//! modalities.

use thermopose::preproc::{prepare_frame, transform_keypoints, DetectorConfig, Direction, Modality};
use thermopose::keypoints::CoordFrame;
use thermopose::synthtug::{generate_dataset, MotionConfig, SynthConfig};

fn main() {
    let cfg = SynthConfig { subjects: 1, trials: 1, motion: MotionConfig { duration_s: 3.0, fps: 2 }, ..Default::default() };
    let data = generate_dataset(&cfg);
    let camera = data.manifest.config.camera;
    for frame in &data.frames {
        let thermal = match prepare_frame(frame, &camera, Modality::Thermal, &DetectorConfig::default()) {
            Ok(p) => p,
            Err(e) => {
                println!("frame {}: {e}", frame.frame_index);
                continue;
            }
        };
        let rgb = prepare_frame(frame, &camera, Modality::Rgb, &DetectorConfig::default()).expect("same detection as thermal");
        let b = thermal.detection.bbox;
        let in_crop = transform_keypoints(&frame.gt_keypoints, &thermal.transform, Direction::ToCrop, CoordFrame::Thermal);
        let visible = in_crop.points.iter().filter(|p| p.is_visible()).count();
        let (lo, hi) = thermal.input.iter().fold((f64::MAX, f64::MIN), |(l, h), &v| (l.min(v), h.max(v)));
        println!(
            "frame {}: box ({:.1}, {:.1}) {:.1}×{:.1} score {:.2}; thermal crop [{lo:.2}, {hi:.2}], rgb crop {} values; {visible}/17 keypoints inside",
            frame.frame_index, b.cx, b.cy, b.w, b.h, b.score, rgb.input.len()
        );
    }
}
