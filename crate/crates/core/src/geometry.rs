//! Rotation representations and forward kinematics over the 22-joint body skeleton.
//!
//! The 6D representation keeps the first two columns of a rotation matrix,
//! column-major: `(c1x, c1y, c1z, c2x, c2y, c2z)`. Decoding runs Gram–Schmidt on
//! the two columns and completes the frame with a cross product, so any pair of
//! non-parallel vectors maps to a proper rotation.
//!
//! World frame: +Z up, +Y forward, +X to the body's right.

use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of joints in the body skeleton (pelvis + 21).
pub const NUM_JOINTS: usize = 22;

/// Tolerance used when validating user-supplied rotation matrices.
pub const VALIDATION_TOL: f64 = 1e-6;

const DEGENERACY_EPS: f64 = 1e-12;

pub const SKELETON_SCHEMA: &str = "sinc.skeleton/1";

/// Joint order shared by poses, packed features and the bundled skeleton.
pub const JOINT_NAMES: [&str; NUM_JOINTS] = [
    "pelvis",
    "left_hip",
    "right_hip",
    "spine1",
    "left_knee",
    "right_knee",
    "spine2",
    "left_ankle",
    "right_ankle",
    "spine3",
    "left_foot",
    "right_foot",
    "neck",
    "left_collar",
    "right_collar",
    "head",
    "left_shoulder",
    "right_shoulder",
    "left_elbow",
    "right_elbow",
    "left_wrist",
    "right_wrist",
];

const DEFAULT_SKELETON_JSON: &str = include_str!("../data/skeleton_smpl22.json");

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("degenerate 6D rotation: {0}")]
    DegenerateRotation(&'static str),
    #[error("matrix is not a rotation (deviation {deviation:.3e})")]
    InvalidMatrix { deviation: f64 },
    #[error("non-finite value in rotation input")]
    NonFinite,
    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("invalid skeleton: {0}")]
    InvalidSkeleton(String),
    #[error("skeleton file: {0}")]
    Io(#[from] std::io::Error),
    #[error("skeleton json: {0}")]
    Json(#[from] serde_json::Error),
}

/// First two columns of a rotation matrix, column-major.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rot6D(pub [f64; 6]);

impl Rot6D {
    pub const IDENTITY: Rot6D = Rot6D([1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);

    pub fn first_column(&self) -> Vector3<f64> {
        Vector3::new(self.0[0], self.0[1], self.0[2])
    }

    pub fn second_column(&self) -> Vector3<f64> {
        Vector3::new(self.0[3], self.0[4], self.0[5])
    }
}

impl Default for Rot6D {
    fn default() -> Self {
        Self::IDENTITY
    }
}

/// A 3×3 rotation matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotMatrix(pub Matrix3<f64>);

impl RotMatrix {
    pub fn identity() -> Self {
        RotMatrix(Matrix3::identity())
    }

    /// Builds from nine values in row-major order. No validation.
    pub fn from_row_major(v: [f64; 9]) -> Self {
        RotMatrix(Matrix3::from_row_slice(&v))
    }

    pub fn to_row_major(&self) -> [f64; 9] {
        let m = &self.0;
        [
            m[(0, 0)],
            m[(0, 1)],
            m[(0, 2)],
            m[(1, 0)],
            m[(1, 1)],
            m[(1, 2)],
            m[(2, 0)],
            m[(2, 1)],
            m[(2, 2)],
        ]
    }

    /// Rotation by `angle` radians about the up axis.
    pub fn about_z(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        RotMatrix(Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0))
    }

    /// Rodrigues' formula; `axis` need not be normalized. A zero axis gives identity.
    pub fn from_axis_angle(axis: Vector3<f64>, angle: f64) -> Self {
        let n = axis.norm();
        if n < DEGENERACY_EPS {
            return Self::identity();
        }
        let k = axis / n;
        let kx = Matrix3::new(0.0, -k.z, k.y, k.z, 0.0, -k.x, -k.y, k.x, 0.0);
        let (s, c) = angle.sin_cos();
        RotMatrix(Matrix3::identity() + kx * s + kx * kx * (1.0 - c))
    }

    /// Largest absolute entry of `RᵀR − I`, combined with `|det R − 1|`.
    pub fn orthonormality_error(&self) -> f64 {
        let m = &self.0;
        let gram = m.transpose() * m - Matrix3::identity();
        let ortho = gram.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        ortho.max((m.determinant() - 1.0).abs())
    }

    pub fn transpose(&self) -> Self {
        RotMatrix(self.0.transpose())
    }
}

impl std::ops::Mul for RotMatrix {
    type Output = RotMatrix;

    fn mul(self, rhs: RotMatrix) -> RotMatrix {
        RotMatrix(self.0 * rhs.0)
    }
}

impl std::ops::Mul<Vector3<f64>> for RotMatrix {
    type Output = Vector3<f64>;

    fn mul(self, rhs: Vector3<f64>) -> Vector3<f64> {
        self.0 * rhs
    }
}

/// Gram–Schmidt decoding of a 6D rotation.
pub fn rot6d_to_matrix(r: &Rot6D) -> Result<RotMatrix, GeometryError> {
    if r.0.iter().any(|v| !v.is_finite()) {
        return Err(GeometryError::NonFinite);
    }
    let c1 = r.first_column();
    let c2 = r.second_column();
    let n1 = c1.norm();
    if n1 < DEGENERACY_EPS {
        return Err(GeometryError::DegenerateRotation("first column is zero"));
    }
    let b1 = c1 / n1;
    let residual = c2 - b1 * b1.dot(&c2);
    let n2 = residual.norm();
    if n2 < DEGENERACY_EPS * c2.norm().max(1.0) {
        return Err(GeometryError::DegenerateRotation("columns are parallel"));
    }
    let b2 = residual / n2;
    let b3 = b1.cross(&b2);
    Ok(RotMatrix(Matrix3::from_columns(&[b1, b2, b3])))
}

/// Packs the first two columns of a validated rotation matrix.
pub fn matrix_to_rot6d(m: &RotMatrix) -> Result<Rot6D, GeometryError> {
    if m.0.iter().any(|v| !v.is_finite()) {
        return Err(GeometryError::NonFinite);
    }
    let deviation = m.orthonormality_error();
    if deviation > VALIDATION_TOL {
        return Err(GeometryError::InvalidMatrix { deviation });
    }
    let c = &m.0;
    Ok(Rot6D([
        c[(0, 0)],
        c[(1, 0)],
        c[(2, 0)],
        c[(0, 1)],
        c[(1, 1)],
        c[(2, 1)],
    ]))
}

/// Joint hierarchy with rest-pose bone offsets (meters, parent frame).
#[derive(Debug, Clone, PartialEq)]
pub struct Skeleton {
    joint_names: Vec<String>,
    parents: Vec<Option<usize>>,
    offsets: Vec<Vector3<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SkeletonFile {
    schema: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    up_axis: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    forward_axis: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    note: Option<String>,
    joint_names: Vec<String>,
    parents: Vec<i64>,
    offsets: Vec<[f64; 3]>,
}

impl Skeleton {
    /// Validates topology: 22 joints, pelvis first, every parent precedes its child.
    pub fn new(
        joint_names: Vec<String>,
        parents: Vec<Option<usize>>,
        offsets: Vec<Vector3<f64>>,
    ) -> Result<Self, GeometryError> {
        let bad = |msg: String| Err(GeometryError::InvalidSkeleton(msg));
        if joint_names.len() != NUM_JOINTS {
            return bad(format!("expected {NUM_JOINTS} joints, got {}", joint_names.len()));
        }
        if parents.len() != NUM_JOINTS || offsets.len() != NUM_JOINTS {
            return bad(format!(
                "parents ({}) and offsets ({}) must have {NUM_JOINTS} entries",
                parents.len(),
                offsets.len()
            ));
        }
        if joint_names[0] != "pelvis" {
            return bad(format!("first joint must be pelvis, got {:?}", joint_names[0]));
        }
        for (j, parent) in parents.iter().enumerate() {
            match (j, parent) {
                (0, None) => {}
                (0, Some(_)) => return bad("pelvis must not have a parent".into()),
                (_, None) => return bad(format!("joint {j} has no parent")),
                (_, Some(p)) if *p >= j => {
                    return bad(format!("joint {j} has parent {p}; parents must precede children"))
                }
                _ => {}
            }
        }
        if offsets.iter().any(|o| o.iter().any(|v| !v.is_finite())) {
            return bad("non-finite bone offset".into());
        }
        Ok(Skeleton {
            joint_names,
            parents,
            offsets,
        })
    }

    /// The bundled SMPL body topology with placeholder offsets.
    pub fn smpl22() -> Self {
        Self::from_json_str(DEFAULT_SKELETON_JSON).expect("bundled skeleton is valid")
    }

    pub fn from_json_str(s: &str) -> Result<Self, GeometryError> {
        let file: SkeletonFile = serde_json::from_str(s)?;
        if file.schema != SKELETON_SCHEMA {
            return Err(GeometryError::InvalidSkeleton(format!(
                "unsupported schema {:?}",
                file.schema
            )));
        }
        let parents = file
            .parents
            .iter()
            .map(|&p| if p < 0 { None } else { Some(p as usize) })
            .collect();
        let offsets = file.offsets.iter().map(|o| Vector3::from(*o)).collect();
        Self::new(file.joint_names, parents, offsets)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, GeometryError> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_string(&self) -> String {
        let file = SkeletonFile {
            schema: SKELETON_SCHEMA.to_string(),
            up_axis: Some("+z".into()),
            forward_axis: Some("+y".into()),
            note: None,
            joint_names: self.joint_names.clone(),
            parents: self
                .parents
                .iter()
                .map(|p| p.map_or(-1, |p| p as i64))
                .collect(),
            offsets: self.offsets.iter().map(|o| [o.x, o.y, o.z]).collect(),
        };
        serde_json::to_string_pretty(&file).expect("skeleton serializes")
    }

    pub fn joint_names(&self) -> &[String] {
        &self.joint_names
    }

    pub fn joint_index(&self, name: &str) -> Option<usize> {
        self.joint_names.iter().position(|n| n == name)
    }

    pub fn parent(&self, joint: usize) -> Option<usize> {
        self.parents[joint]
    }

    pub fn offset(&self, joint: usize) -> Vector3<f64> {
        self.offsets[joint]
    }

    pub fn len(&self) -> usize {
        self.joint_names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.joint_names.is_empty()
    }
}

/// World-space joint positions for one pose.
///
/// `pose[0]` is the pelvis rotation (global orientation); the rest are local
/// rotations relative to each joint's parent.
pub fn forward_kinematics(
    skeleton: &Skeleton,
    pose: &[RotMatrix],
    root_translation: Vector3<f64>,
) -> Result<Vec<Vector3<f64>>, GeometryError> {
    if pose.len() != skeleton.len() {
        return Err(GeometryError::ShapeMismatch {
            expected: skeleton.len(),
            found: pose.len(),
        });
    }
    let mut global_rot: Vec<Matrix3<f64>> = Vec::with_capacity(pose.len());
    let mut positions: Vec<Vector3<f64>> = Vec::with_capacity(pose.len());
    for (j, local) in pose.iter().enumerate() {
        match skeleton.parent(j) {
            None => {
                global_rot.push(local.0);
                positions.push(root_translation);
            }
            Some(p) => {
                let parent_rot = global_rot[p];
                positions.push(positions[p] + parent_rot * skeleton.offset(j));
                global_rot.push(parent_rot * local.0);
            }
        }
    }
    Ok(positions)
}
