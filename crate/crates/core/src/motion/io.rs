//! Motion and statistics file formats.
//!
//! Text: JSON `{schema, id, fps, frames: [{rotations: [132], translation: [3]}], annotations?}`.
//!
//! Binary: magic `SINCMO01`, then little-endian `u32` frame count, `f32` fps and
//! `frame_count × 135` `f32` packed features. The binary form carries no id; the
//! file stem is used.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{
    pack_features, unpack_pose, Annotation, FeatureFrame, MotionError, MotionSequence, Pose,
    StandardizationStats, FEATURE_DIM, ROTATION_DIM,
};
use crate::geometry::Rot6D;

pub const MOTION_SCHEMA: &str = "sinc.motion/1";
pub const BINARY_MAGIC: &[u8; 8] = b"SINCMO01";
const BINARY_HEADER_LEN: usize = 16;

#[derive(Debug, Error)]
pub enum MotionIoError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("schema: {0}")]
    Schema(String),
    #[error("binary motion: {0}")]
    Binary(String),
    #[error("unrecognized motion file extension: {0}")]
    UnknownFormat(String),
    #[error(transparent)]
    Motion(#[from] MotionError),
}

impl MotionIoError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        MotionIoError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct FrameRecord {
    rotations: Vec<f64>,
    translation: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct MotionFile {
    schema: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    up_axis: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    forward_axis: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rot6d_layout: Option<String>,
    id: String,
    #[serde(default = "default_fps")]
    fps: f64,
    frames: Vec<FrameRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    annotations: Vec<Annotation>,
}

fn default_fps() -> f64 {
    super::DEFAULT_FPS
}

pub fn motion_from_json_str(s: &str) -> Result<MotionSequence, MotionIoError> {
    let file: MotionFile = serde_json::from_str(s)?;
    if file.schema != MOTION_SCHEMA {
        return Err(MotionIoError::Schema(format!("unsupported schema {:?}", file.schema)));
    }
    for (name, value, expected) in [
        ("up_axis", &file.up_axis, "+z"),
        ("forward_axis", &file.forward_axis, "+y"),
    ] {
        if let Some(v) = value {
            if v != expected {
                return Err(MotionIoError::Schema(format!("{name} must be {expected:?}, got {v:?}")));
            }
        }
    }
    let frames = file
        .frames
        .iter()
        .enumerate()
        .map(|(i, fr)| {
            if fr.rotations.len() != ROTATION_DIM || fr.translation.len() != 3 {
                return Err(MotionIoError::Schema(format!(
                    "frame {i}: expected {ROTATION_DIM} rotation and 3 translation values, got {} and {}",
                    fr.rotations.len(),
                    fr.translation.len()
                )));
            }
            let mut values = fr.rotations.clone();
            values.extend_from_slice(&fr.translation);
            Ok(unpack_pose(&FeatureFrame::from_slice(&values)?))
        })
        .collect::<Result<Vec<Pose>, _>>()?;
    let m = MotionSequence {
        id: file.id,
        fps: file.fps,
        frames,
        annotations: file.annotations,
    };
    m.validate()?;
    Ok(m)
}

pub fn motion_to_json_string(m: &MotionSequence) -> String {
    let frames = m
        .frames
        .iter()
        .map(|p| FrameRecord {
            rotations: p.rotations.iter().flat_map(|r: &Rot6D| r.0).collect(),
            translation: p.translation.to_vec(),
        })
        .collect();
    let file = MotionFile {
        schema: MOTION_SCHEMA.into(),
        up_axis: Some("+z".into()),
        forward_axis: Some("+y".into()),
        rot6d_layout: Some("column-major-c1c2".into()),
        id: m.id.clone(),
        fps: m.fps,
        frames,
        annotations: m.annotations.clone(),
    };
    serde_json::to_string(&file).expect("motion serializes")
}

/// Decodes the binary format. Rejects trailing bytes and non-finite values.
pub fn decode_binary(bytes: &[u8], id: &str) -> Result<MotionSequence, MotionIoError> {
    let err = |m: String| Err(MotionIoError::Binary(m));
    if bytes.len() < BINARY_HEADER_LEN {
        return err(format!("{} bytes is shorter than the header", bytes.len()));
    }
    if &bytes[..8] != BINARY_MAGIC {
        return err("bad magic".into());
    }
    let count = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let fps = f32::from_le_bytes(bytes[12..16].try_into().unwrap());
    let expected = count
        .checked_mul(FEATURE_DIM * 4)
        .and_then(|n| n.checked_add(BINARY_HEADER_LEN));
    if expected != Some(bytes.len()) {
        return err(format!(
            "frame count {count} does not match payload of {} bytes",
            bytes.len() - BINARY_HEADER_LEN
        ));
    }
    let mut frames = Vec::with_capacity(count);
    let mut values = [0.0f64; FEATURE_DIM];
    for chunk in bytes[BINARY_HEADER_LEN..].chunks_exact(FEATURE_DIM * 4) {
        for (v, b) in values.iter_mut().zip(chunk.chunks_exact(4)) {
            *v = f32::from_le_bytes(b.try_into().unwrap()) as f64;
        }
        frames.push(unpack_pose(&FeatureFrame(values)));
    }
    let m = MotionSequence {
        id: id.to_string(),
        fps: fps as f64,
        frames,
        annotations: Vec::new(),
    };
    m.validate()?;
    Ok(m)
}

/// Encodes to the binary format; values are narrowed to `f32`.
pub fn encode_binary(m: &MotionSequence) -> Result<Vec<u8>, MotionIoError> {
    let count = u32::try_from(m.len())
        .map_err(|_| MotionIoError::Binary(format!("{} frames exceeds u32", m.len())))?;
    let mut out = Vec::with_capacity(BINARY_HEADER_LEN + m.len() * FEATURE_DIM * 4);
    out.extend_from_slice(BINARY_MAGIC);
    out.extend_from_slice(&count.to_le_bytes());
    out.extend_from_slice(&(m.fps as f32).to_le_bytes());
    for f in pack_features(m) {
        for v in f.0 {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    Ok(out)
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Reads `.json` or `.bin` motion files.
pub fn read_motion(path: impl AsRef<Path>) -> Result<MotionSequence, MotionIoError> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => {
            let s = std::fs::read_to_string(path).map_err(|e| MotionIoError::io(path, e))?;
            motion_from_json_str(&s)
        }
        Some("bin") => {
            let b = std::fs::read(path).map_err(|e| MotionIoError::io(path, e))?;
            decode_binary(&b, &file_stem(path))
        }
        _ => Err(MotionIoError::UnknownFormat(path.display().to_string())),
    }
}

/// Writes by extension, `.json` or `.bin`.
pub fn write_motion(path: impl AsRef<Path>, m: &MotionSequence) -> Result<(), MotionIoError> {
    let path = path.as_ref();
    let bytes = match path.extension().and_then(|e| e.to_str()) {
        Some("json") => motion_to_json_string(m).into_bytes(),
        Some("bin") => encode_binary(m)?,
        _ => return Err(MotionIoError::UnknownFormat(path.display().to_string())),
    };
    std::fs::write(path, bytes).map_err(|e| MotionIoError::io(path, e))
}

pub fn stats_from_json_str(s: &str) -> Result<StandardizationStats, MotionIoError> {
    let stats: StandardizationStats = serde_json::from_str(s)?;
    stats.validate()?;
    Ok(stats)
}

pub fn read_stats(path: impl AsRef<Path>) -> Result<StandardizationStats, MotionIoError> {
    let path = path.as_ref();
    let s = std::fs::read_to_string(path).map_err(|e| MotionIoError::io(path, e))?;
    stats_from_json_str(&s)
}

pub fn write_stats(path: impl AsRef<Path>, stats: &StandardizationStats) -> Result<(), MotionIoError> {
    let path = path.as_ref();
    let s = serde_json::to_string_pretty(stats).expect("stats serialize");
    std::fs::write(path, s).map_err(|e| MotionIoError::io(path, e))
}
