//! Motion data model: poses, packed 135-d features, canonicalization,
//! standardization and trimming.
//!
//! Packed feature layout per frame: 22 joints × 6 rotation values (skeleton
//! order, column-major 6D), then the root trajectory x, y and the root height z.
//! Trajectory values are absolute positions in the canonical frame.

pub mod io;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{self, GeometryError, Rot6D, RotMatrix, NUM_JOINTS};

/// Packed feature width: 22 × 6 rotation values + 3 translation values.
pub const FEATURE_DIM: usize = NUM_JOINTS * 6 + 3;
pub const ROTATION_DIM: usize = NUM_JOINTS * 6;
pub const DEFAULT_FPS: f64 = 30.0;
pub const STD_FLOOR: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum MotionError {
    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("invalid length {requested} for motion of {available} frames")]
    InvalidLength { requested: usize, available: usize },
    #[error("motion has no frames")]
    Empty,
    #[error("fps must be positive and finite, got {0}")]
    InvalidFps(f64),
    #[error("non-finite value in frame {0}")]
    NonFinite(usize),
    #[error("degenerate pose: {0}")]
    DegeneratePose(String),
    #[error("invalid annotation {text:?} [{start}, {end})")]
    InvalidAnnotation { text: String, start: usize, end: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// One frame: per-joint 6D rotations and the root translation in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotations: [Rot6D; NUM_JOINTS],
    pub translation: [f64; 3],
}

impl Pose {
    pub fn identity() -> Self {
        Pose {
            rotations: [Rot6D::IDENTITY; NUM_JOINTS],
            translation: [0.0; 3],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.translation.iter().all(|v| v.is_finite())
            && self.rotations.iter().all(|r| r.0.iter().all(|v| v.is_finite()))
    }

    pub fn rotation_matrices(&self) -> Result<Vec<RotMatrix>, GeometryError> {
        self.rotations.iter().map(geometry::rot6d_to_matrix).collect()
    }

    pub fn translation_vec(&self) -> Vector3<f64> {
        Vector3::from(self.translation)
    }
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

/// Action label over frames `[start_frame, end_frame)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub text: String,
    pub start_frame: usize,
    pub end_frame: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MotionSequence {
    pub id: String,
    pub fps: f64,
    pub frames: Vec<Pose>,
    pub annotations: Vec<Annotation>,
}

impl MotionSequence {
    /// Builds a sequence and checks its invariants.
    pub fn new(id: impl Into<String>, fps: f64, frames: Vec<Pose>) -> Result<Self, MotionError> {
        let m = MotionSequence {
            id: id.into(),
            fps,
            frames,
            annotations: Vec::new(),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn with_annotations(mut self, annotations: Vec<Annotation>) -> Result<Self, MotionError> {
        self.annotations = annotations;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), MotionError> {
        if self.frames.is_empty() {
            return Err(MotionError::Empty);
        }
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(MotionError::InvalidFps(self.fps));
        }
        if let Some(i) = self.frames.iter().position(|p| !p.is_finite()) {
            return Err(MotionError::NonFinite(i));
        }
        for a in &self.annotations {
            if a.start_frame >= a.end_frame || a.end_frame > self.frames.len() {
                return Err(MotionError::InvalidAnnotation {
                    text: a.text.clone(),
                    start: a.start_frame,
                    end: a.end_frame,
                });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Frames `[start, end)` as a new sequence; annotations are clipped and shifted.
    pub fn slice(&self, id: impl Into<String>, start: usize, end: usize) -> Result<Self, MotionError> {
        if start >= end || end > self.len() {
            return Err(MotionError::InvalidLength {
                requested: end.saturating_sub(start),
                available: self.len(),
            });
        }
        let annotations = self
            .annotations
            .iter()
            .filter(|a| a.start_frame < end && a.end_frame > start)
            .map(|a| Annotation {
                text: a.text.clone(),
                start_frame: a.start_frame.max(start) - start,
                end_frame: a.end_frame.min(end) - start,
            })
            .collect();
        Ok(MotionSequence {
            id: id.into(),
            fps: self.fps,
            frames: self.frames[start..end].to_vec(),
            annotations,
        })
    }
}

/// One packed frame of exactly [`FEATURE_DIM`] values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureFrame(pub [f64; FEATURE_DIM]);

impl FeatureFrame {
    pub fn from_slice(values: &[f64]) -> Result<Self, MotionError> {
        let arr: [f64; FEATURE_DIM] =
            values.try_into().map_err(|_| MotionError::ShapeMismatch {
                expected: FEATURE_DIM,
                found: values.len(),
            })?;
        Ok(FeatureFrame(arr))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

pub fn pack_pose(pose: &Pose) -> FeatureFrame {
    let mut out = [0.0; FEATURE_DIM];
    for (j, r) in pose.rotations.iter().enumerate() {
        out[j * 6..j * 6 + 6].copy_from_slice(&r.0);
    }
    out[ROTATION_DIM..].copy_from_slice(&pose.translation);
    FeatureFrame(out)
}

pub fn unpack_pose(frame: &FeatureFrame) -> Pose {
    let mut rotations = [Rot6D::IDENTITY; NUM_JOINTS];
    for (j, r) in rotations.iter_mut().enumerate() {
        r.0.copy_from_slice(&frame.0[j * 6..j * 6 + 6]);
    }
    let mut translation = [0.0; 3];
    translation.copy_from_slice(&frame.0[ROTATION_DIM..]);
    Pose {
        rotations,
        translation,
    }
}

pub fn pack_features(m: &MotionSequence) -> Vec<FeatureFrame> {
    m.frames.iter().map(pack_pose).collect()
}

pub fn unpack_features(
    id: impl Into<String>,
    fps: f64,
    frames: &[FeatureFrame],
) -> Result<MotionSequence, MotionError> {
    MotionSequence::new(id, fps, frames.iter().map(unpack_pose).collect())
}

/// Forward direction of a pose: pelvis rotation applied to +Y, on the ground plane.
fn ground_forward(pose: &Pose) -> Result<Vector3<f64>, MotionError> {
    let root = geometry::rot6d_to_matrix(&pose.rotations[0])?;
    let f = root * Vector3::y();
    let planar = Vector3::new(f.x, f.y, 0.0);
    let n = planar.norm();
    if n < 1e-9 {
        return Err(MotionError::DegeneratePose(
            "frame-0 forward axis is parallel to the up axis".into(),
        ));
    }
    Ok(planar / n)
}

/// Rigidly rotates the sequence about +Z so frame 0 faces +Y and moves the
/// frame-0 root to the ground-plane origin. Heights are preserved.
pub fn canonicalize(m: &MotionSequence) -> Result<MotionSequence, MotionError> {
    let first = m.frames.first().ok_or(MotionError::Empty)?;
    let f = ground_forward(first)?;
    // rotation taking (fx, fy) onto (0, 1): cos = fy, sin = fx
    let q = RotMatrix(nalgebra::Matrix3::new(
        f.y, -f.x, 0.0, //
        f.x, f.y, 0.0, //
        0.0, 0.0, 1.0,
    ));
    let origin = Vector3::new(first.translation[0], first.translation[1], 0.0);
    let frames = m
        .frames
        .iter()
        .map(|pose| {
            let root = geometry::rot6d_to_matrix(&pose.rotations[0])?;
            let mut out = *pose;
            out.rotations[0] = geometry::matrix_to_rot6d(&(q * root))?;
            let t = q * (pose.translation_vec() - origin);
            out.translation = [t.x, t.y, t.z];
            Ok(out)
        })
        .collect::<Result<Vec<_>, MotionError>>()?;
    Ok(MotionSequence {
        id: m.id.clone(),
        fps: m.fps,
        frames,
        annotations: m.annotations.clone(),
    })
}

/// Keeps frames `[0, n_frames)`.
pub fn trim_to(m: &MotionSequence, n_frames: usize) -> Result<MotionSequence, MotionError> {
    if n_frames == 0 || n_frames > m.len() {
        return Err(MotionError::InvalidLength {
            requested: n_frames,
            available: m.len(),
        });
    }
    m.slice(m.id.clone(), 0, n_frames)
}

/// Per-dimension mean and standard deviation of packed features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl StandardizationStats {
    pub fn identity() -> Self {
        StandardizationStats {
            mean: vec![0.0; FEATURE_DIM],
            std: vec![1.0; FEATURE_DIM],
        }
    }

    /// Population statistics over all frames; std floored at [`STD_FLOOR`].
    pub fn compute(frames: &[FeatureFrame]) -> Result<Self, MotionError> {
        if frames.is_empty() {
            return Err(MotionError::Empty);
        }
        let n = frames.len() as f64;
        let mut mean = vec![0.0; FEATURE_DIM];
        for f in frames {
            for (m, v) in mean.iter_mut().zip(f.0.iter()) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; FEATURE_DIM];
        for f in frames {
            for ((acc, v), m) in var.iter_mut().zip(f.0.iter()).zip(&mean) {
                *acc += (v - m) * (v - m);
            }
        }
        let std = var.iter().map(|v| (v / n).sqrt().max(STD_FLOOR)).collect();
        Ok(StandardizationStats { mean, std })
    }

    pub fn validate(&self) -> Result<(), MotionError> {
        for len in [self.mean.len(), self.std.len()] {
            if len != FEATURE_DIM {
                return Err(MotionError::ShapeMismatch {
                    expected: FEATURE_DIM,
                    found: len,
                });
            }
        }
        if let Some(i) = self
            .mean
            .iter()
            .chain(&self.std)
            .position(|v| !v.is_finite())
        {
            return Err(MotionError::NonFinite(i));
        }
        Ok(())
    }

    fn std_at(&self, i: usize) -> f64 {
        self.std[i].max(STD_FLOOR)
    }
}

pub fn standardize(
    frames: &[FeatureFrame],
    stats: &StandardizationStats,
) -> Result<Vec<FeatureFrame>, MotionError> {
    stats.validate()?;
    Ok(frames
        .iter()
        .map(|f| {
            let mut out = f.0;
            for (i, v) in out.iter_mut().enumerate() {
                *v = (*v - stats.mean[i]) / stats.std_at(i);
            }
            FeatureFrame(out)
        })
        .collect())
}

pub fn destandardize(
    frames: &[FeatureFrame],
    stats: &StandardizationStats,
) -> Result<Vec<FeatureFrame>, MotionError> {
    stats.validate()?;
    Ok(frames
        .iter()
        .map(|f| {
            let mut out = f.0;
            for (i, v) in out.iter_mut().enumerate() {
                *v = *v * stats.std_at(i) + stats.mean[i];
            }
            FeatureFrame(out)
        })
        .collect())
}
