//! Generates a small synthetic dataset, writes it to disk and reads it back.
//!
//! ```text
//! cargo run --example generate_dataset -- /tmp/tug
//! ```

use thermopose::synthtug::{generate_dataset, read_dataset, write_dataset, MotionConfig, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "tug_data".into());
    let cfg = SynthConfig { seed: 3, subjects: 2, trials: 2, motion: MotionConfig { duration_s: 4.0, fps: 4 }, ..Default::default() };
    let data = generate_dataset(&cfg);
    write_dataset(&data.frames, &data.manifest, dir.as_ref())?;

    let back = read_dataset(dir.as_ref())?;
    assert_eq!(back.frames.len(), data.frames.len());
    println!("{} frames in {dir}", back.frames.len());
    for s in &back.manifest.subjects {
        println!("subject {}: {} frames", s.id, back.frames_of(s.id).count());
    }
    let f = &back.frames[5];
    let nose = f.gt_keypoints.points[0];
    println!(
        "frame s{}t{}f{}: thermal {}×{}, rgb {}×{}, nose at ({:.1}, {:.1})",
        f.subject_id, f.trial_id, f.frame_index, back.manifest.thermal_resolution[0], back.manifest.thermal_resolution[1],
        f.rgb_width, f.rgb_height, nose.x, nose.y
    );
    Ok(())
}
