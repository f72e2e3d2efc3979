//! Procedural toy corpus: short motions built from analytic joint curves,
//! labeled with a handful of actions, with a pre-filled parts cache so the
//! whole pipeline runs offline.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::Vector3;

use super::{PipelineError, SegmentRecord, SegmentsFile, LABEL_PROMPT, SEGMENTS_SCHEMA};
use crate::geometry::{matrix_to_rot6d, RotMatrix, NUM_JOINTS};
use crate::motion::io as motion_io;
use crate::motion::{pack_features, MotionSequence, Pose, StandardizationStats, DEFAULT_FPS};
use crate::partlab::{build_prompt, CacheEntry, ResponseCache};
use crate::rng::SeededRng;

/// Pelvis height of the neutral pose, in meters.
const PELVIS_HEIGHT: f64 = 0.92;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ToyAction {
    Walk,
    WaveRight,
    WaveLeft,
    RaiseArms,
    Clap,
    Bow,
    Nod,
    KickRight,
    TurnAround,
    Stand,
}

impl ToyAction {
    pub const ALL: [ToyAction; 10] = [
        ToyAction::Walk,
        ToyAction::WaveRight,
        ToyAction::WaveLeft,
        ToyAction::RaiseArms,
        ToyAction::Clap,
        ToyAction::Bow,
        ToyAction::Nod,
        ToyAction::KickRight,
        ToyAction::TurnAround,
        ToyAction::Stand,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ToyAction::Walk => "walk",
            ToyAction::WaveRight => "wave with the right hand",
            ToyAction::WaveLeft => "wave with the left hand",
            ToyAction::RaiseArms => "raise both arms",
            ToyAction::Clap => "clap",
            ToyAction::Bow => "bow",
            ToyAction::Nod => "nod",
            ToyAction::KickRight => "kick with the right leg",
            ToyAction::TurnAround => "turn around",
            ToyAction::Stand => "stand",
        }
    }

    /// Cached completion text, in the list style of the few-shot prompt.
    pub fn response(self) -> &'static str {
        match self {
            ToyAction::Walk | ToyAction::Stand => "left leg\nright leg\nwaist",
            ToyAction::WaveRight => "right arm",
            ToyAction::WaveLeft => "left arm",
            ToyAction::RaiseArms | ToyAction::Clap => "left arm\nright arm",
            ToyAction::Bow => "torso",
            ToyAction::Nod => "neck",
            ToyAction::KickRight => "right leg",
            ToyAction::TurnAround => "buttocks\nleft leg\nright leg",
        }
    }

    /// Adds this action's joint motion at local time `t` (seconds).
    fn apply(self, rots: &mut [RotMatrix; NUM_JOINTS], trans: &mut Vector3<f64>, t: f64, amp: f64) {
        let x = Vector3::x();
        let y = Vector3::y();
        let z = Vector3::z();
        let mut turn = |j: usize, axis: Vector3<f64>, angle: f64| {
            rots[j] = rots[j] * RotMatrix::from_axis_angle(axis, angle);
        };
        match self {
            ToyAction::Walk => {
                let w = 2.0 * PI * 0.9 * t;
                turn(1, x, 0.45 * amp * w.sin());
                turn(2, x, -0.45 * amp * w.sin());
                turn(4, x, -0.6 * amp * w.sin().max(0.0));
                turn(5, x, -0.6 * amp * (-w.sin()).max(0.0));
                turn(0, z, 0.05 * w.sin());
                *trans += Vector3::new(0.0, 1.1 * amp * t, 0.02 * (2.0 * w).sin());
            }
            ToyAction::WaveRight => {
                turn(17, y, -1.3 * amp);
                turn(19, z, 0.6 * (2.0 * PI * 1.5 * t).sin());
            }
            ToyAction::WaveLeft => {
                turn(16, y, 1.3 * amp);
                turn(18, z, -0.6 * (2.0 * PI * 1.5 * t).sin());
            }
            ToyAction::RaiseArms => {
                let up = 1.4 * amp * (t / 1.2).min(1.0);
                turn(16, y, up);
                turn(17, y, -up);
            }
            ToyAction::Clap => {
                let a = 0.8 + 0.3 * (2.0 * PI * 2.0 * t).sin();
                turn(16, z, -a * amp);
                turn(17, z, a * amp);
            }
            ToyAction::Bow => {
                let a = 0.5 * amp * (PI * (t / 2.0).min(1.0)).sin();
                turn(3, x, a);
                turn(6, x, 0.5 * a);
            }
            ToyAction::Nod => turn(12, x, 0.3 * amp * (2.0 * PI * t).sin()),
            ToyAction::KickRight => {
                let k = (2.0 * PI * 0.7 * t).sin().max(0.0);
                turn(2, x, 1.0 * amp * k);
                turn(5, x, -0.4 * amp * k);
            }
            ToyAction::TurnAround => {
                turn(0, z, PI * amp * (t / 2.0).min(1.0));
                turn(1, x, 0.2 * (2.0 * PI * t).sin());
                turn(2, x, -0.2 * (2.0 * PI * t).sin());
            }
            ToyAction::Stand => {
                *trans += Vector3::new(0.01 * (2.0 * PI * 0.3 * t).sin(), 0.0, 0.0);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyConfig {
    pub n_motions: usize,
    pub seed: u64,
    pub fps: f64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        ToyConfig {
            n_motions: 50,
            seed: 0,
            fps: DEFAULT_FPS,
        }
    }
}

struct Placed {
    action: ToyAction,
    start: usize,
    end: usize,
    amp: f64,
}

fn render(id: String, fps: f64, len: usize, placed: &[Placed]) -> Result<MotionSequence, PipelineError> {
    let frames = (0..len)
        .map(|f| {
            let mut rots = [RotMatrix::identity(); NUM_JOINTS];
            let mut trans = Vector3::new(0.0, 0.0, PELVIS_HEIGHT);
            for p in placed.iter().filter(|p| (p.start..p.end).contains(&f)) {
                p.action.apply(&mut rots, &mut trans, (f - p.start) as f64 / fps, p.amp);
            }
            let mut pose = Pose::identity();
            for (r6, m) in pose.rotations.iter_mut().zip(&rots) {
                *r6 = matrix_to_rot6d(m).expect("rotation built from axis-angle");
            }
            pose.translation = [trans.x, trans.y, trans.z];
            pose
        })
        .collect();
    Ok(MotionSequence::new(id, fps, frames)?)
}

/// Writes a toy corpus under `dir` and returns its segment records.
///
/// Each motion carries one action, two overlapping actions, or two actions
/// one after the other. Every fifth motion is stored as JSON, the rest binary.
pub fn generate(dir: impl AsRef<Path>, config: ToyConfig) -> Result<Vec<SegmentRecord>, PipelineError> {
    let dir = dir.as_ref();
    let motions_dir = dir.join("motions");
    std::fs::create_dir_all(&motions_dir).map_err(|e| PipelineError::io(&motions_dir, e))?;

    let mut records = Vec::new();
    let mut features = Vec::new();
    for k in 0..config.n_motions {
        let mut rng = SeededRng::derive(config.seed, k as u64);
        let len = 45 + rng.below(120);
        let pick = |rng: &mut SeededRng| ToyAction::ALL[rng.below(ToyAction::ALL.len())];
        let first = pick(&mut rng);
        let amp = 0.8 + 0.4 * rng.next_f64();
        let layout = rng.next_f64();
        let mut placed = Vec::new();
        if layout < 0.55 {
            placed.push(Placed { action: first, start: 0, end: len, amp });
        } else if layout < 0.85 {
            // overlapping pair; short overlaps exercise the frame filter
            let second = pick(&mut rng);
            let start = rng.below(len / 2);
            let end = (start + 8 + rng.below(len - start - 7)).min(len);
            placed.push(Placed { action: first, start: 0, end: len, amp });
            placed.push(Placed { action: second, start, end, amp: 0.8 + 0.4 * rng.next_f64() });
        } else {
            let second = pick(&mut rng);
            let mid = len / 3 + rng.below(len / 3);
            placed.push(Placed { action: first, start: 0, end: mid, amp });
            placed.push(Placed { action: second, start: mid, end: len, amp });
        }

        let id = format!("toy-{k:03}");
        let motion = render(id.clone(), config.fps, len, &placed)?;
        features.extend(pack_features(&motion));
        let ext = if k % 5 == 0 { "json" } else { "bin" };
        motion_io::write_motion(motions_dir.join(format!("{id}.{ext}")), &motion)?;
        for (n, p) in placed.iter().enumerate() {
            records.push(SegmentRecord {
                id: Some(format!("{id}/{n}")),
                motion_id: id.clone(),
                start_frame: p.start,
                end_frame: p.end,
                action: p.action.label().to_string(),
                parts: None,
            });
        }
    }

    let seg_path = dir.join("segments.json");
    let file = SegmentsFile {
        schema: SEGMENTS_SCHEMA.into(),
        segments: records.clone(),
    };
    let mut text = serde_json::to_string_pretty(&file).expect("segments serialize");
    text.push('\n');
    std::fs::write(&seg_path, text).map_err(|e| PipelineError::io(&seg_path, e))?;

    let cache = ResponseCache::at(dir.join("parts_cache"));
    for action in ToyAction::ALL {
        let entry = CacheEntry {
            prompt: build_prompt(action.label(), LABEL_PROMPT)?,
            response: action.response().to_string(),
            timestamp: 0,
        };
        cache.put(LABEL_PROMPT, action.label(), entry)?;
    }

    if !features.is_empty() {
        let stats = StandardizationStats::compute(&features)?;
        motion_io::write_stats(dir.join("stats.json"), &stats)?;
    }
    Ok(records)
}
