//! Scores hand-made detections with OKS and COCO-style average precision.

use thermopose::evalkit::{average_precision, oks, ApInterpolation, DetInstance, FrameInstances, GtInstance, OksConstants};
use thermopose::keypoints::{CoordFrame, Keypoint, KeypointSet, NUM_KEYPOINTS};

fn pose(dx: f64, jitter: f64) -> KeypointSet {
    let pts: [Keypoint; NUM_KEYPOINTS] =
        std::array::from_fn(|i| Keypoint::new(30.0 + dx + (i % 3) as f64 * 3.0 + jitter * (i as f64).sin(), 10.0 + 2.5 * i as f64, 2));
    KeypointSet::new(CoordFrame::Thermal, pts)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let consts = OksConstants::default();
    let gt = GtInstance::from_keypoints(pose(0.0, 0.0)).expect("visible keypoints");
    let mut frames = Vec::new();
    for (i, jitter) in [0.0, 0.5, 1.5, 3.0, 6.0].into_iter().enumerate() {
        let det = DetInstance { keypoints: pose(0.0, jitter), score: 1.0 - 0.1 * i as f64 };
        println!("frame {i}: jitter {jitter:.1} px -> OKS {:.3}", oks(&det, &gt, &consts)?);
        frames.push(FrameInstances::new(i as u64, vec![det], std::slice::from_ref(&gt), &consts)?);
    }
    let ap = average_precision(&frames, ApInterpolation::AllPoint)?;
    println!("AP {:.3}  AP50 {:.3}  AP75 {:.3}", ap.ap, ap.ap50, ap.ap75);
    Ok(())
}
