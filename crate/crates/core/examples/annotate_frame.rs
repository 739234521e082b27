//! Draws ground-truth keypoints over an upscaled thermal frame and writes a
//! PPM, plus the banner shown when no person is found.
//!
//! ```text
//! cargo run --example annotate_frame -- overlay.ppm
//! ```

use thermopose::cli::annotate::{render_annotation, OUT_H, OUT_W};
use thermopose::evalkit::{OraclePredictor, Predictor};
use thermopose::synthtug::pnm::encode_ppm8;
use thermopose::synthtug::{generate_dataset, MotionConfig, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "overlay.ppm".into());
    let cfg = SynthConfig { subjects: 1, trials: 1, motion: MotionConfig { duration_s: 2.0, fps: 2 }, ..Default::default() };
    let data = generate_dataset(&cfg);
    let frame = &data.frames[2];
    let prediction = OraclePredictor::default().predict(frame)?;
    std::fs::write(&path, encode_ppm8(OUT_W, OUT_H, &render_annotation(frame, Some(&prediction))))?;
    let missing = format!("{}_no_person.ppm", path.strip_suffix(".ppm").unwrap_or(&path));
    std::fs::write(&missing, encode_ppm8(OUT_W, OUT_H, &render_annotation(frame, None)))?;
    println!("wrote {path} and {missing} ({OUT_W}×{OUT_H})");
    Ok(())
}
