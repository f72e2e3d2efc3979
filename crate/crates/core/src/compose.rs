//! Body-part stitching of two labeled motions.
//!
//! After ordering the inputs so that B involves no more parts than A, B
//! supplies the joints of its own parts. If B touches a leg or the global
//! orientation it also supplies both legs, the pelvis rotation and the root
//! translation, since leg motion and root trajectory move together. Every
//! other slot comes from A. Both inputs are canonicalized and trimmed to the
//! shorter length first.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{JOINT_NAMES, NUM_JOINTS};
use crate::motion::{self, Annotation, MotionError, MotionSequence};
use crate::partlab::{PartSet, Slot};

pub const SIDECAR_SCHEMA: &str = "sinc.composition/1";

#[derive(Debug, Error)]
pub enum ComposeError {
    #[error("incompatible part sets {a} and {b}")]
    Incompatible { a: PartSet, b: PartSet },
    #[error("motion {0:?} has no frames")]
    EmptyMotion(String),
    #[error("action {0:?} has an empty part set")]
    EmptyPartSet(String),
    #[error(transparent)]
    Motion(#[from] MotionError),
}

#[derive(Debug, Clone)]
pub struct LabeledMotion {
    pub motion: MotionSequence,
    pub action: String,
    pub parts: PartSet,
}

impl LabeledMotion {
    pub fn new(motion: MotionSequence, action: impl Into<String>, parts: PartSet) -> Self {
        LabeledMotion {
            motion,
            action: action.into(),
            parts,
        }
    }
}

/// Which (reordered) parent supplied a slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Source {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComposeMode {
    /// Requires disjoint part sets; used for synthetic training data.
    Strict,
    /// Overlaps allowed, B wins; the single-action baseline.
    Override,
}

/// Source of each of the 22 joint slots and the translation slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SourceMap {
    pub joints: [Source; NUM_JOINTS],
    pub translation: Source,
}

impl SourceMap {
    pub fn get(&self, slot: Slot) -> Source {
        match slot {
            Slot::Joint(j) => self.joints[j],
            Slot::Translation => self.translation,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (Slot, Source)> + '_ {
        Slot::all().map(|s| (s, self.get(s)))
    }

    pub fn count(&self, source: Source) -> usize {
        self.iter().filter(|(_, s)| *s == source).count()
    }

    /// Slots from B for a given B-side part set.
    pub fn for_b_parts(parts_b: PartSet) -> SourceMap {
        let claimed = if parts_b.is_disjoint(PartSet::LOCOMOTION) {
            parts_b
        } else {
            parts_b.union(PartSet::LOCOMOTION)
        };
        let pick = |slot: Slot| {
            if claimed.contains(slot.owner()) {
                Source::B
            } else {
                Source::A
            }
        };
        let mut joints = [Source::A; NUM_JOINTS];
        for (j, s) in joints.iter_mut().enumerate() {
            *s = pick(Slot::Joint(j));
        }
        SourceMap {
            joints,
            translation: pick(Slot::Translation),
        }
    }
}

impl Serialize for SourceMap {
    /// Ordered map `joint name | "translation" -> "A" | "B"`.
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = s.serialize_map(Some(NUM_JOINTS + 1))?;
        for (j, src) in self.joints.iter().enumerate() {
            map.serialize_entry(JOINT_NAMES[j], src)?;
        }
        map.serialize_entry("translation", &self.translation)?;
        map.end()
    }
}

impl<'de> Deserialize<'de> for SourceMap {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let raw = std::collections::BTreeMap::<String, Source>::deserialize(d)?;
        let mut joints = [Source::A; NUM_JOINTS];
        for (j, name) in JOINT_NAMES.iter().enumerate() {
            joints[j] = *raw
                .get(*name)
                .ok_or_else(|| D::Error::custom(format!("source map is missing {name}")))?;
        }
        let translation = *raw
            .get("translation")
            .ok_or_else(|| D::Error::custom("source map is missing translation"))?;
        if raw.len() != NUM_JOINTS + 1 {
            return Err(D::Error::custom("source map has unknown slots"));
        }
        Ok(SourceMap { joints, translation })
    }
}

#[derive(Debug, Clone)]
pub struct CompositionResult {
    pub motion: MotionSequence,
    pub source_map: SourceMap,
    /// Action texts of (A, B) after reordering.
    pub actions: (String, String),
    pub parent_ids: (String, String),
    pub parts: (PartSet, PartSet),
    /// True when the inputs were swapped to put the smaller part set in B.
    pub swapped: bool,
}

/// Provenance record written next to a composed motion file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub schema: String,
    pub source_map: SourceMap,
    pub actions: [String; 2],
    pub parent_ids: [String; 2],
    pub parts: [PartSet; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

impl CompositionResult {
    pub fn sidecar(&self) -> Sidecar {
        Sidecar {
            schema: SIDECAR_SCHEMA.into(),
            source_map: self.source_map,
            actions: [self.actions.0.clone(), self.actions.1.clone()],
            parent_ids: [self.parent_ids.0.clone(), self.parent_ids.1.clone()],
            parts: [self.parts.0, self.parts.1],
            description: None,
        }
    }
}

pub fn sidecar_from_json_str(s: &str) -> Result<Sidecar, serde_json::Error> {
    let sidecar: Sidecar = serde_json::from_str(s)?;
    if sidecar.schema != SIDECAR_SCHEMA {
        return Err(serde::de::Error::custom(format!(
            "unsupported sidecar schema {:?}",
            sidecar.schema
        )));
    }
    Ok(sidecar)
}

/// True iff the part sets share no part.
pub fn compatible(parts_a: PartSet, parts_b: PartSet) -> bool {
    parts_a.is_disjoint(parts_b)
}

pub fn compose_strict(a: &LabeledMotion, b: &LabeledMotion) -> Result<CompositionResult, ComposeError> {
    compose(a, b, ComposeMode::Strict)
}

pub fn compose_override(a: &LabeledMotion, b: &LabeledMotion) -> Result<CompositionResult, ComposeError> {
    compose(a, b, ComposeMode::Override)
}

pub fn compose(
    a: &LabeledMotion,
    b: &LabeledMotion,
    mode: ComposeMode,
) -> Result<CompositionResult, ComposeError> {
    for m in [a, b] {
        if m.motion.is_empty() {
            return Err(ComposeError::EmptyMotion(m.motion.id.clone()));
        }
        if mode == ComposeMode::Strict && m.parts.is_empty() {
            return Err(ComposeError::EmptyPartSet(m.action.clone()));
        }
    }
    if mode == ComposeMode::Strict && !compatible(a.parts, b.parts) {
        return Err(ComposeError::Incompatible {
            a: a.parts,
            b: b.parts,
        });
    }
    let swapped = b.parts.len() > a.parts.len();
    let (a, b) = if swapped { (b, a) } else { (a, b) };

    let n = a.motion.len().min(b.motion.len());
    let motion_a = motion::trim_to(&motion::canonicalize(&a.motion)?, n)?;
    let motion_b = motion::trim_to(&motion::canonicalize(&b.motion)?, n)?;
    if motion_a.fps != motion_b.fps {
        log::warn!(
            "composing {} ({} fps) with {} ({} fps); keeping {} fps",
            a.motion.id,
            motion_a.fps,
            b.motion.id,
            motion_b.fps,
            motion_a.fps
        );
    }

    let source_map = SourceMap::for_b_parts(b.parts);
    let frames = motion_a
        .frames
        .iter()
        .zip(&motion_b.frames)
        .map(|(fa, fb)| {
            let mut out = *fa;
            for (j, rot) in out.rotations.iter_mut().enumerate() {
                if source_map.joints[j] == Source::B {
                    *rot = fb.rotations[j];
                }
            }
            if source_map.translation == Source::B {
                out.translation = fb.translation;
            }
            out
        })
        .collect();

    let motion = MotionSequence {
        id: format!("{}+{}", a.motion.id, b.motion.id),
        fps: motion_a.fps,
        frames,
        annotations: vec![
            Annotation {
                text: a.action.clone(),
                start_frame: 0,
                end_frame: n,
            },
            Annotation {
                text: b.action.clone(),
                start_frame: 0,
                end_frame: n,
            },
        ],
    };
    Ok(CompositionResult {
        motion,
        source_map,
        actions: (a.action.clone(), b.action.clone()),
        parent_ids: (a.motion.id.clone(), b.motion.id.clone()),
        parts: (a.parts, b.parts),
        swapped,
    })
}
