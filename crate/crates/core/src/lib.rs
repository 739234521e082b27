//! Thermal keypoint distillation toolkit.

pub mod keypoints;
pub mod numerics;
pub mod synthtug;
pub mod preproc;
pub mod heatmap;
pub mod posemodel;
pub mod losses;
pub mod evalkit;
pub mod cli;
