//! Positional (APE) and variance (AVE) errors over joint trajectories, and the
//! embedding cosine score.
//!
//! All means are pooled over frames and joints. Joint 0 is the pelvis and the
//! ground plane is xy.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{forward_kinematics, GeometryError, Skeleton};
use crate::motion::MotionSequence;

pub const DEFAULT_EMBEDDING_DIM: usize = 256;
const MIN_NORM: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("length mismatch: generated has {gen} frames, ground truth {gt}")]
    LengthMismatch { gen: usize, gt: usize },
    #[error("joint count mismatch: {0} vs {1}")]
    JointMismatch(usize, usize),
    #[error("need at least {needed} frames, found {found}")]
    TooShort { needed: usize, found: usize },
    #[error("embedding has (near) zero norm")]
    ZeroVector,
    #[error("embedding dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("no embedding for {0:?}")]
    MissingEmbedding(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("embedding command failed: {0}")]
    Provider(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Per-frame world joint positions.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTrajectory {
    n_joints: usize,
    positions: Vec<[f64; 3]>,
}

impl JointTrajectory {
    pub fn new(frames: Vec<Vec<[f64; 3]>>) -> Result<Self, MetricsError> {
        let n_joints = frames.first().map_or(0, Vec::len);
        if frames.iter().any(|f| f.len() != n_joints) {
            return Err(MetricsError::Schema("frames have different joint counts".into()));
        }
        if n_joints == 0 && !frames.is_empty() {
            return Err(MetricsError::Schema("frames have no joints".into()));
        }
        let positions: Vec<[f64; 3]> = frames.into_iter().flatten().collect();
        if positions.iter().flatten().any(|v| !v.is_finite()) {
            return Err(MetricsError::Schema("non-finite joint position".into()));
        }
        Ok(JointTrajectory { n_joints, positions })
    }

    pub fn from_motion(motion: &MotionSequence, skeleton: &Skeleton) -> Result<Self, MetricsError> {
        let mut positions = Vec::with_capacity(motion.len() * skeleton.len());
        for pose in &motion.frames {
            let joints = forward_kinematics(skeleton, &pose.rotation_matrices()?, pose.translation_vec())?;
            positions.extend(joints.iter().map(|p| [p.x, p.y, p.z]));
        }
        Ok(JointTrajectory {
            n_joints: skeleton.len(),
            positions,
        })
    }

    pub fn len(&self) -> usize {
        if self.n_joints == 0 {
            0
        } else {
            self.positions.len() / self.n_joints
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_joints(&self) -> usize {
        self.n_joints
    }

    pub fn frame(&self, f: usize) -> &[[f64; 3]] {
        &self.positions[f * self.n_joints..(f + 1) * self.n_joints]
    }

    /// First `n` frames.
    pub fn truncated(&self, n: usize) -> Self {
        let n = n.min(self.len());
        JointTrajectory {
            n_joints: self.n_joints,
            positions: self.positions[..n * self.n_joints].to_vec(),
        }
    }

    fn view(&self, variant: Variant, f: usize) -> Vec<Vec<f64>> {
        let frame = self.frame(f);
        let root = frame[0];
        match variant {
            Variant::Root => vec![root.to_vec()],
            Variant::Traj => vec![root[..2].to_vec()],
            Variant::MeanGlobal => frame.iter().map(|p| p.to_vec()).collect(),
            Variant::MeanLocal => frame
                .iter()
                .map(|p| (0..3).map(|k| p[k] - root[k]).collect())
                .collect(),
        }
    }
}

/// Joint set and framing of a metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Pelvis position.
    Root,
    /// Pelvis position on the ground plane.
    Traj,
    /// All joints relative to the pelvis.
    MeanLocal,
    /// All joints in world space.
    MeanGlobal,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Root, Variant::Traj, Variant::MeanLocal, Variant::MeanGlobal];
}

fn check_pair(gen: &JointTrajectory, gt: &JointTrajectory, min_frames: usize) -> Result<(), MetricsError> {
    if gen.len() != gt.len() {
        return Err(MetricsError::LengthMismatch { gen: gen.len(), gt: gt.len() });
    }
    if gen.n_joints != gt.n_joints {
        return Err(MetricsError::JointMismatch(gen.n_joints, gt.n_joints));
    }
    if gen.len() < min_frames {
        return Err(MetricsError::TooShort { needed: min_frames, found: gen.len() });
    }
    Ok(())
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Average positional error: mean per-frame, per-joint L2 distance.
pub fn ape(gen: &JointTrajectory, gt: &JointTrajectory, variant: Variant) -> Result<f64, MetricsError> {
    check_pair(gen, gt, 1)?;
    let mut total = 0.0;
    let mut count = 0usize;
    for f in 0..gen.len() {
        let (a, b) = (gen.view(variant, f), gt.view(variant, f));
        for (pa, pb) in a.iter().zip(&b) {
            total += dist(pa, pb);
            count += 1;
        }
    }
    Ok(total / count as f64)
}

/// Per-joint, per-coordinate unbiased temporal variance.
fn temporal_variance(t: &JointTrajectory, variant: Variant) -> Vec<Vec<f64>> {
    let frames: Vec<Vec<Vec<f64>>> = (0..t.len()).map(|f| t.view(variant, f)).collect();
    let n = frames.len() as f64;
    let (joints, dims) = (frames[0].len(), frames[0][0].len());
    (0..joints)
        .map(|j| {
            (0..dims)
                .map(|k| {
                    let mean = frames.iter().map(|fr| fr[j][k]).sum::<f64>() / n;
                    frames.iter().map(|fr| (fr[j][k] - mean).powi(2)).sum::<f64>() / (n - 1.0)
                })
                .collect()
        })
        .collect()
}

/// Average variance error: mean over joints of the L2 distance between
/// temporal variance vectors.
pub fn ave(gen: &JointTrajectory, gt: &JointTrajectory, variant: Variant) -> Result<f64, MetricsError> {
    check_pair(gen, gt, 2)?;
    let (va, vb) = (temporal_variance(gen, variant), temporal_variance(gt, variant));
    Ok(va.iter().zip(&vb).map(|(a, b)| dist(a, b)).sum::<f64>() / va.len() as f64)
}

/// `(1 + cos) / 2` between two embeddings.
pub fn temos_score(f_gt: &[f64], f_gen: &[f64]) -> Result<f64, MetricsError> {
    if f_gt.len() != f_gen.len() {
        return Err(MetricsError::DimMismatch(f_gt.len(), f_gen.len()));
    }
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let (na, nb) = (norm(f_gt), norm(f_gen));
    if !(na > MIN_NORM && nb > MIN_NORM) {
        return Err(MetricsError::ZeroVector);
    }
    let dot: f64 = f_gt.iter().zip(f_gen).map(|(a, b)| a * b).sum();
    let cos = (dot / (na * nb)).clamp(-1.0, 1.0);
    Ok(0.5 * (1.0 + cos))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub ape_root: f64,
    pub ape_traj: f64,
    pub ape_mean_local: f64,
    pub ape_mean_global: f64,
    pub ave_root: f64,
    pub ave_traj: f64,
    pub ave_mean_local: f64,
    pub ave_mean_global: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temos_score: Option<f64>,
}

impl MetricReport {
    /// All positional metrics for one pair of equally long trajectories.
    pub fn compute(gen: &JointTrajectory, gt: &JointTrajectory) -> Result<Self, MetricsError> {
        Ok(MetricReport {
            ape_root: ape(gen, gt, Variant::Root)?,
            ape_traj: ape(gen, gt, Variant::Traj)?,
            ape_mean_local: ape(gen, gt, Variant::MeanLocal)?,
            ape_mean_global: ape(gen, gt, Variant::MeanGlobal)?,
            ave_root: ave(gen, gt, Variant::Root)?,
            ave_traj: ave(gen, gt, Variant::Traj)?,
            ave_mean_local: ave(gen, gt, Variant::MeanLocal)?,
            ave_mean_global: ave(gen, gt, Variant::MeanGlobal)?,
            temos_score: None,
        })
    }

    fn positional(&self) -> [f64; 8] {
        [
            self.ape_root,
            self.ape_traj,
            self.ape_mean_local,
            self.ape_mean_global,
            self.ave_root,
            self.ave_traj,
            self.ave_mean_local,
            self.ave_mean_global,
        ]
    }

    /// Element-wise mean; the score is averaged only if every report has one.
    pub fn mean(reports: &[MetricReport]) -> Option<MetricReport> {
        if reports.is_empty() {
            return None;
        }
        let n = reports.len() as f64;
        let mut acc = [0.0; 8];
        for r in reports {
            for (a, v) in acc.iter_mut().zip(r.positional()) {
                *a += v;
            }
        }
        let acc = acc.map(|a| a / n);
        let temos = reports
            .iter()
            .map(|r| r.temos_score)
            .sum::<Option<f64>>()
            .map(|s| s / n);
        Some(MetricReport {
            ape_root: acc[0],
            ape_traj: acc[1],
            ape_mean_local: acc[2],
            ape_mean_global: acc[3],
            ave_root: acc[4],
            ave_traj: acc[5],
            ave_mean_local: acc[6],
            ave_mean_global: acc[7],
            temos_score: temos,
        })
    }
}

/// Aligned text table: name, score, then APE and AVE each as root joint,
/// global trajectory, mean local, mean global.
pub fn format_table(rows: &[(String, MetricReport)]) -> String {
    let name_w = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(0).max(4);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<name_w$} {:>7} | {:^39} | {:^39}",
        "", "TEMOS", "Average Positional Error", "Average Variance Error"
    );
    let sub = ["root", "traj", "local", "global"];
    let _ = writeln!(
        out,
        "{:<name_w$} {:>7} | {} | {}",
        "Item",
        "score",
        sub.map(|s| format!("{s:>9}")).join(" "),
        sub.map(|s| format!("{s:>9}")).join(" ")
    );
    for (name, r) in rows {
        let score = r.temos_score.map_or("-".to_string(), |s| format!("{s:.3}"));
        let p = r.positional().map(|v| format!("{v:>9.3}"));
        let _ = writeln!(out, "{name:<name_w$} {score:>7} | {} | {}", p[..4].join(" "), p[4..].join(" "));
    }
    out
}

/// Parses a JSON object `{id: [floats]}`; all vectors must share one dimension.
pub fn embeddings_from_json_str(s: &str) -> Result<BTreeMap<String, Vec<f64>>, MetricsError> {
    let map: BTreeMap<String, Vec<f64>> =
        serde_json::from_str(s).map_err(|e| MetricsError::Schema(e.to_string()))?;
    let mut dim = None;
    for (id, v) in &map {
        if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
            return Err(MetricsError::Schema(format!("embedding {id:?} is empty or non-finite")));
        }
        match dim {
            None => dim = Some(v.len()),
            Some(d) if d != v.len() => {
                return Err(MetricsError::Schema(format!(
                    "embedding {id:?} has dimension {}, expected {d}",
                    v.len()
                )))
            }
            _ => {}
        }
    }
    Ok(map)
}

fn select(
    mut all: BTreeMap<String, Vec<f64>>,
    ids: &[String],
) -> Result<HashMap<String, Vec<f64>>, MetricsError> {
    ids.iter()
        .map(|id| {
            all.remove(id)
                .map(|v| (id.clone(), v))
                .ok_or_else(|| MetricsError::MissingEmbedding(id.clone()))
        })
        .collect()
}

pub fn load_embeddings(path: impl AsRef<Path>, ids: &[String]) -> Result<HashMap<String, Vec<f64>>, MetricsError> {
    let path = path.as_ref();
    let s = std::fs::read_to_string(path).map_err(|source| MetricsError::Io {
        path: path.display().to_string(),
        source,
    })?;
    select(embeddings_from_json_str(&s)?, ids)
}

/// External embedding program run through `sh -c`: reads one motion file path
/// per input line and prints one whitespace-separated vector per output line.
#[derive(Debug, Clone)]
pub struct CommandEmbedder {
    pub command: String,
}

impl CommandEmbedder {
    pub fn new(command: impl Into<String>) -> Self {
        CommandEmbedder { command: command.into() }
    }

    pub fn embed(&self, paths: &[PathBuf]) -> Result<Vec<Vec<f64>>, MetricsError> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(&self.command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| MetricsError::Provider(format!("spawn {:?}: {e}", self.command)))?;
        let mut stdin = child.stdin.take().expect("piped stdin");
        let input: String = paths.iter().map(|p| format!("{}\n", p.display())).collect();
        let writer = std::thread::spawn(move || stdin.write_all(input.as_bytes()));
        let stdout = child.stdout.take().expect("piped stdout");
        let lines: Vec<String> = BufReader::new(stdout)
            .lines()
            .collect::<Result<_, _>>()
            .map_err(|e| MetricsError::Provider(e.to_string()))?;
        let status = child.wait().map_err(|e| MetricsError::Provider(e.to_string()))?;
        // A provider may exit without draining stdin; only its status matters.
        let _ = writer.join();
        if !status.success() {
            return Err(MetricsError::Provider(format!("exited with {status}")));
        }
        let vectors: Vec<Vec<f64>> = lines
            .iter()
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                l.split_whitespace()
                    .map(|t| t.parse::<f64>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| MetricsError::Provider(format!("bad vector {l:?}: {e}")))
            })
            .collect::<Result<_, _>>()?;
        if vectors.len() != paths.len() {
            return Err(MetricsError::Provider(format!(
                "expected {} vectors, got {}",
                paths.len(),
                vectors.len()
            )));
        }
        if let Some(v) = vectors.iter().find(|v| v.len() != vectors[0].len()) {
            return Err(MetricsError::DimMismatch(vectors[0].len(), v.len()));
        }
        Ok(vectors)
    }
}
