//! Renders Gaussian keypoint heatmaps and decodes them back to coordinates.

use thermopose::heatmap::{decode, encode, DEFAULT_SIGMA, HM_H, HM_W};
use thermopose::keypoints::{CoordFrame, Keypoint, KeypointSet, NUM_KEYPOINTS};

fn main() {
    let pts: [Keypoint; NUM_KEYPOINTS] = std::array::from_fn(|i| Keypoint::new(40.0 + 7.3 * i as f64, 30.0 + 11.1 * i as f64, 2));
    let kps = KeypointSet::new(CoordFrame::Crop, pts);
    let hm = encode(&kps, DEFAULT_SIGMA);
    let dec = decode(&hm);
    println!("{NUM_KEYPOINTS} channels of {HM_H}×{HM_W}, σ = {DEFAULT_SIGMA} cells");
    for (i, (p, q)) in kps.points.iter().zip(&dec.points).enumerate().step_by(4) {
        let err = ((p.x - q.x).powi(2) + (p.y - q.y).powi(2)).sqrt();
        println!("kp {i:>2}: ({:6.2}, {:6.2}) -> ({:6.2}, {:6.2})  error {err:.2} px  confidence {:.3}", p.x, p.y, q.x, q.y, q.confidence);
    }
}
