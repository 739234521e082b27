use super::pnm::{self, PnmError};
use super::render::Frame;
use super::{Dataset, DatasetManifest, FORMAT_VERSION, THERMAL_H, THERMAL_W};
use crate::keypoints::{CoordFrame, Keypoint, KeypointSet, NUM_KEYPOINTS};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("no manifest.json in {0}")]
    NoManifest(PathBuf),
    #[error("{file}: format_version {found} is not supported (expected {expected})")]
    VersionMismatch { file: PathBuf, found: u32, expected: u32 },
    #[error("{file}: corrupt header: {reason}")]
    CorruptHeader { file: PathBuf, reason: String },
    #[error("{file}: truncated: expected {expected} bytes of pixel data, found {found}")]
    Truncated { file: PathBuf, expected: usize, found: usize },
    #[error("dataset inconsistent: {0}")]
    Inconsistent(String),
    #[error("{file}: {source}")]
    Io { file: PathBuf, source: std::io::Error },
}

#[derive(Serialize, Deserialize)]
struct FrameRecord {
    frame: u32,
    thermal: Vec<[f64; 3]>,
    rgb: Vec<[f64; 3]>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    dropped: bool,
}

fn io_err(file: &Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io { file: file.to_path_buf(), source }
}

fn frame_stem(s: u32, t: u32, f: u32) -> String {
    format!("s{s}_t{t}_f{f}")
}

fn pnm_err(file: PathBuf, e: PnmError) -> DataError {
    match e {
        PnmError::Header(reason) => DataError::CorruptHeader { file, reason },
        PnmError::Truncated { expected, found } => DataError::Truncated { file, expected, found },
    }
}

fn to_set(frame: CoordFrame, pts: &[[f64; 3]], file: &Path) -> Result<KeypointSet, DataError> {
    if pts.len() != NUM_KEYPOINTS {
        return Err(DataError::CorruptHeader {
            file: file.to_path_buf(),
            reason: format!("expected {NUM_KEYPOINTS} keypoints, found {}", pts.len()),
        });
    }
    let mut out = [Keypoint::default(); NUM_KEYPOINTS];
    for (o, p) in out.iter_mut().zip(pts) {
        *o = Keypoint::from(*p);
    }
    Ok(KeypointSet::new(frame, out))
}

/// Writes the manifest, one PGM and one PPM per frame, and per-trial keypoint files.
pub fn write_dataset(frames: &[Frame], manifest: &DatasetManifest, root: &Path) -> Result<(), DataError> {
    let expected: usize = manifest.trials.iter().map(|t| t.frame_count as usize).sum();
    if expected != frames.len() {
        return Err(DataError::Inconsistent(format!(
            "manifest lists {expected} frames but {} were supplied",
            frames.len()
        )));
    }
    fs::create_dir_all(root).map_err(io_err(root))?;
    for trial in &manifest.trials {
        let mut records = Vec::with_capacity(trial.frame_count as usize);
        for i in 0..trial.frame_count {
            let f = frames
                .iter()
                .find(|f| f.subject_id == trial.subject_id && f.trial_id == trial.trial_id && f.frame_index == i)
                .ok_or_else(|| {
                    DataError::Inconsistent(format!(
                        "frame {i} of subject {} trial {} missing",
                        trial.subject_id, trial.trial_id
                    ))
                })?;
            let stem = frame_stem(f.subject_id, f.trial_id, i);
            let tp = root.join(format!("{stem}_thermal.pgm"));
            fs::write(&tp, pnm::encode_pgm16(THERMAL_W, THERMAL_H, &f.thermal)).map_err(io_err(&tp))?;
            let rp = root.join(format!("{stem}_rgb.ppm"));
            fs::write(&rp, pnm::encode_ppm8(f.rgb_width, f.rgb_height, &f.rgb)).map_err(io_err(&rp))?;
            records.push(FrameRecord {
                frame: i,
                thermal: f.gt_keypoints.points.iter().map(|&k| k.into()).collect(),
                rgb: f.gt_keypoints_rgb.points.iter().map(|&k| k.into()).collect(),
                dropped: f.dropped,
            });
        }
        let kp = root.join(format!("s{}_t{}_keypoints.json", trial.subject_id, trial.trial_id));
        fs::write(&kp, serde_json::to_vec(&records).unwrap()).map_err(io_err(&kp))?;
    }
    let mp = root.join("manifest.json");
    fs::write(&mp, serde_json::to_vec_pretty(manifest).unwrap()).map_err(io_err(&mp))?;
    Ok(())
}

pub fn read_dataset(root: &Path) -> Result<Dataset, DataError> {
    let mp = root.join("manifest.json");
    if !mp.is_file() {
        return Err(DataError::NoManifest(root.to_path_buf()));
    }
    let text = fs::read(&mp).map_err(io_err(&mp))?;
    let raw: serde_json::Value = serde_json::from_slice(&text)
        .map_err(|e| DataError::CorruptHeader { file: mp.clone(), reason: e.to_string() })?;
    let version = raw.get("format_version").and_then(|v| v.as_u64()).ok_or_else(|| DataError::CorruptHeader {
        file: mp.clone(),
        reason: "format_version missing".into(),
    })?;
    if version != FORMAT_VERSION as u64 {
        return Err(DataError::VersionMismatch { file: mp, found: version as u32, expected: FORMAT_VERSION });
    }
    let manifest: DatasetManifest = serde_json::from_value(raw)
        .map_err(|e| DataError::CorruptHeader { file: mp.clone(), reason: e.to_string() })?;

    let mut frames = Vec::new();
    for trial in &manifest.trials {
        let (s, t) = (trial.subject_id, trial.trial_id);
        let kp = root.join(format!("s{s}_t{t}_keypoints.json"));
        let bytes = fs::read(&kp).map_err(io_err(&kp))?;
        let records: Vec<FrameRecord> = serde_json::from_slice(&bytes)
            .map_err(|e| DataError::CorruptHeader { file: kp.clone(), reason: e.to_string() })?;
        if records.len() != trial.frame_count as usize {
            return Err(DataError::Inconsistent(format!(
                "subject {s} trial {t}: manifest frame_count {} but {} has {} records",
                trial.frame_count,
                kp.display(),
                records.len()
            )));
        }
        let on_disk = count_frame_files(root, s, t)?;
        if on_disk != trial.frame_count as usize {
            return Err(DataError::Inconsistent(format!(
                "subject {s} trial {t}: manifest frame_count {} but {on_disk} thermal images on disk",
                trial.frame_count
            )));
        }
        for (i, rec) in records.iter().enumerate() {
            let i = i as u32;
            if rec.frame != i {
                return Err(DataError::Inconsistent(format!("{}: record {i} has frame {}", kp.display(), rec.frame)));
            }
            let stem = frame_stem(s, t, i);
            let tp = root.join(format!("{stem}_thermal.pgm"));
            let timg = pnm::decode_pgm16(&fs::read(&tp).map_err(io_err(&tp))?).map_err(|e| pnm_err(tp.clone(), e))?;
            if (timg.width, timg.height) != (THERMAL_W, THERMAL_H) {
                return Err(DataError::CorruptHeader {
                    file: tp,
                    reason: format!("thermal image is {}x{}, expected 80x60", timg.width, timg.height),
                });
            }
            let rp = root.join(format!("{stem}_rgb.ppm"));
            let rimg = pnm::decode_ppm8(&fs::read(&rp).map_err(io_err(&rp))?).map_err(|e| pnm_err(rp.clone(), e))?;
            if [rimg.width, rimg.height] != manifest.rgb_resolution {
                return Err(DataError::Inconsistent(format!(
                    "{}: {}x{} disagrees with manifest rgb_resolution",
                    rp.display(),
                    rimg.width,
                    rimg.height
                )));
            }
            frames.push(Frame {
                thermal: timg.data,
                rgb: rimg.data,
                rgb_width: rimg.width,
                rgb_height: rimg.height,
                gt_keypoints: to_set(CoordFrame::Thermal, &rec.thermal, &kp)?,
                gt_keypoints_rgb: to_set(CoordFrame::Rgb, &rec.rgb, &kp)?,
                subject_id: s,
                trial_id: t,
                frame_index: i,
                dropped: rec.dropped,
            });
        }
    }
    Ok(Dataset { manifest, frames })
}

fn count_frame_files(root: &Path, s: u32, t: u32) -> Result<usize, DataError> {
    let prefix = format!("s{s}_t{t}_f");
    let mut n = 0;
    for entry in fs::read_dir(root).map_err(io_err(root))? {
        let name = entry.map_err(io_err(root))?.file_name();
        let name = name.to_string_lossy();
        if name.starts_with(&prefix) && name.ends_with("_thermal.pgm") {
            n += 1;
        }
    }
    Ok(n)
}
