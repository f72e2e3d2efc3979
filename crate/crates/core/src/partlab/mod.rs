//! Body-part taxonomy and language-model part labeling.
//!
//! Actions are mapped to subsets of six coarse parts by prompting a text
//! completion model, parsing its answer against a fixed vocabulary, and
//! remapping `neck` to the torso and `waist`/`buttocks` to global orientation.

mod accuracy;
mod client;
mod parse;
mod prompt;

pub use accuracy::{
    annotations_from_json_str, label_accuracy, load_annotations, AccuracyReport, Mark,
    PartAnnotation,
};
pub use client::{
    cache_entry_from_json_str, CacheEntry, CompletionClient, HttpCompletionClient, HttpConfig, PartLabeler, ResponseCache,
    API_KEY_ENV, CACHE_DIR_ENV,
};
pub use parse::{parse_response, LookupTable};
pub use prompt::{build_prompt, PromptKind, FEW_SHOT_TEMPLATE};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::geometry::NUM_JOINTS;

#[derive(Debug, Error)]
pub enum PartLabError {
    #[error("action text is empty")]
    EmptyAction,
    #[error("no prediction for annotated action {0:?}")]
    MissingPrediction(String),
    #[error("annotation set is empty")]
    NoAnnotations,
    #[error("completion service unavailable: {0}")]
    ServiceUnavailable(String),
    #[error("offline mode: no cached response for {kind} prompt of action {action:?}")]
    CacheMiss { kind: PromptKind, action: String },
    #[error("unknown body part {0:?}")]
    UnknownPart(String),
    #[error("schema: {0}")]
    Schema(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl PartLabError {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        PartLabError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BodyPart {
    LeftArm,
    RightArm,
    LeftLeg,
    RightLeg,
    Torso,
    GlobalOrientation,
}

impl BodyPart {
    pub const ALL: [BodyPart; 6] = [
        BodyPart::LeftArm,
        BodyPart::RightArm,
        BodyPart::LeftLeg,
        BodyPart::RightLeg,
        BodyPart::Torso,
        BodyPart::GlobalOrientation,
    ];

    /// Column order of the labeling accuracy table.
    pub const REPORT_ORDER: [BodyPart; 6] = [
        BodyPart::GlobalOrientation,
        BodyPart::Torso,
        BodyPart::LeftArm,
        BodyPart::RightArm,
        BodyPart::LeftLeg,
        BodyPart::RightLeg,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Identifier used in files and on the command line.
    pub fn key(self) -> &'static str {
        match self {
            BodyPart::LeftArm => "left_arm",
            BodyPart::RightArm => "right_arm",
            BodyPart::LeftLeg => "left_leg",
            BodyPart::RightLeg => "right_leg",
            BodyPart::Torso => "torso",
            BodyPart::GlobalOrientation => "global_orientation",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            BodyPart::LeftArm => "Left arm",
            BodyPart::RightArm => "Right arm",
            BodyPart::LeftLeg => "Left leg",
            BodyPart::RightLeg => "Right leg",
            BodyPart::Torso => "Torso",
            BodyPart::GlobalOrientation => "Global",
        }
    }

    /// Skeleton joints driven by this part. Global orientation also owns the
    /// root translation, see [`Slot`].
    pub fn joints(self) -> &'static [usize] {
        match self {
            BodyPart::LeftArm => &[13, 16, 18, 20],
            BodyPart::RightArm => &[14, 17, 19, 21],
            BodyPart::LeftLeg => &[1, 4, 7, 10],
            BodyPart::RightLeg => &[2, 5, 8, 11],
            BodyPart::Torso => &[3, 6, 9, 12, 15],
            BodyPart::GlobalOrientation => &[0],
        }
    }

    pub fn is_locomotion(self) -> bool {
        matches!(
            self,
            BodyPart::LeftLeg | BodyPart::RightLeg | BodyPart::GlobalOrientation
        )
    }
}

impl fmt::Display for BodyPart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for BodyPart {
    type Err = PartLabError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace([' ', '-'], "_");
        match norm.as_str() {
            "left_arm" => Ok(BodyPart::LeftArm),
            "right_arm" => Ok(BodyPart::RightArm),
            "left_leg" => Ok(BodyPart::LeftLeg),
            "right_leg" => Ok(BodyPart::RightLeg),
            "torso" => Ok(BodyPart::Torso),
            "global_orientation" | "global" => Ok(BodyPart::GlobalOrientation),
            _ => Err(PartLabError::UnknownPart(s.to_string())),
        }
    }
}

impl Serialize for BodyPart {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.key())
    }
}

impl<'de> Deserialize<'de> for BodyPart {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A subset of the six body parts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct PartSet(u8);

impl PartSet {
    pub const EMPTY: PartSet = PartSet(0);
    pub const ALL: PartSet = PartSet(0b11_1111);
    pub const LOCOMOTION: PartSet = PartSet(
        (1 << BodyPart::LeftLeg as u8)
            | (1 << BodyPart::RightLeg as u8)
            | (1 << BodyPart::GlobalOrientation as u8),
    );

    pub fn new() -> Self {
        Self::EMPTY
    }

    pub fn from_bits(bits: u8) -> Self {
        PartSet(bits & Self::ALL.0)
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn insert(&mut self, part: BodyPart) {
        self.0 |= 1 << part as u8;
    }

    pub fn with(mut self, part: BodyPart) -> Self {
        self.insert(part);
        self
    }

    pub fn contains(self, part: BodyPart) -> bool {
        self.0 & (1 << part as u8) != 0
    }

    pub fn union(self, other: PartSet) -> PartSet {
        PartSet(self.0 | other.0)
    }

    pub fn intersection(self, other: PartSet) -> PartSet {
        PartSet(self.0 & other.0)
    }

    pub fn is_disjoint(self, other: PartSet) -> bool {
        self.0 & other.0 == 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn iter(self) -> impl Iterator<Item = BodyPart> {
        BodyPart::ALL.into_iter().filter(move |p| self.contains(*p))
    }

    /// Parses a comma-separated list of part keys.
    pub fn parse_list(s: &str) -> Result<PartSet, PartLabError> {
        s.split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(BodyPart::from_str)
            .collect()
    }
}

impl FromIterator<BodyPart> for PartSet {
    fn from_iter<I: IntoIterator<Item = BodyPart>>(iter: I) -> Self {
        let mut s = PartSet::EMPTY;
        for p in iter {
            s.insert(p);
        }
        s
    }
}

impl fmt::Display for PartSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.iter().map(BodyPart::key).collect();
        write!(f, "{{{}}}", names.join(", "))
    }
}

impl Serialize for PartSet {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(self.iter())
    }
}

impl<'de> Deserialize<'de> for PartSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let parts = Vec::<BodyPart>::deserialize(d)?;
        Ok(parts.into_iter().collect())
    }
}

/// A stitchable channel of a pose: one joint rotation or the root translation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Slot {
    Joint(usize),
    Translation,
}

impl Slot {
    /// All 22 joint slots followed by the translation slot.
    pub fn all() -> impl Iterator<Item = Slot> {
        (0..NUM_JOINTS).map(Slot::Joint).chain(std::iter::once(Slot::Translation))
    }

    /// The part that owns this slot.
    pub fn owner(self) -> BodyPart {
        match self {
            Slot::Translation => BodyPart::GlobalOrientation,
            Slot::Joint(j) => *PART_OF_JOINT
                .get(j)
                .unwrap_or_else(|| panic!("joint index {j} out of range")),
        }
    }
}

const PART_OF_JOINT: [BodyPart; NUM_JOINTS] = {
    use BodyPart::*;
    [
        GlobalOrientation, // pelvis
        LeftLeg,
        RightLeg,
        Torso,
        LeftLeg,
        RightLeg,
        Torso,
        LeftLeg,
        RightLeg,
        Torso,
        LeftLeg,
        RightLeg,
        Torso,
        LeftArm,
        RightArm,
        Torso,
        LeftArm,
        RightArm,
        LeftArm,
        RightArm,
        LeftArm,
        RightArm,
    ]
};

/// Lowercases, trims and collapses internal whitespace.
pub fn normalize_action(action: &str) -> String {
    action
        .split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}
