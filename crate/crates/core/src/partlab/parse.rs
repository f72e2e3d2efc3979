use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use super::{BodyPart, PartLabError, PartSet, PromptKind};

const DEFAULT_LOOKUP_JSON: &str = include_str!("../../data/freeform_lookup.json");

/// Longest phrase, in words, tried at each token position.
const MAX_PHRASE_WORDS: usize = 3;

/// Answer vocabulary offered in the list prompts, with the remapping to parts.
fn vocabulary(phrase: &str) -> Option<BodyPart> {
    match phrase {
        "left arm" => Some(BodyPart::LeftArm),
        "right arm" => Some(BodyPart::RightArm),
        "left leg" => Some(BodyPart::LeftLeg),
        "right leg" => Some(BodyPart::RightLeg),
        "torso" | "neck" => Some(BodyPart::Torso),
        "buttocks" | "waist" => Some(BodyPart::GlobalOrientation),
        _ => None,
    }
}

/// Maps anatomy words found in free-form answers to body parts.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LookupTable {
    entries: BTreeMap<String, PartSet>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum LookupValue {
    One(BodyPart),
    Many(Vec<BodyPart>),
}

impl LookupTable {
    /// The bundled table.
    pub fn builtin() -> Self {
        Self::from_json_str(DEFAULT_LOOKUP_JSON).expect("bundled lookup table is valid")
    }

    /// JSON object of `word -> part` or `word -> [parts]`.
    pub fn from_json_str(s: &str) -> Result<Self, PartLabError> {
        let raw: BTreeMap<String, LookupValue> =
            serde_json::from_str(s).map_err(|e| PartLabError::Schema(format!("lookup table: {e}")))?;
        let mut entries = BTreeMap::new();
        for (word, value) in raw {
            let key = normalize_text(&word).join(" ");
            if key.is_empty() {
                return Err(PartLabError::Schema(format!("lookup table: empty key {word:?}")));
            }
            let parts = match value {
                LookupValue::One(p) => PartSet::EMPTY.with(p),
                LookupValue::Many(ps) => ps.into_iter().collect(),
            };
            entries.insert(key, parts);
        }
        Ok(LookupTable { entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PartLabError> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| PartLabError::io(path, e))?;
        Self::from_json_str(&s)
    }

    pub fn get(&self, phrase: &str) -> Option<PartSet> {
        self.entries.get(phrase).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Lowercases, drops apostrophes, turns other punctuation into spaces and
/// splits into words.
fn normalize_text(text: &str) -> Vec<String> {
    let cleaned: String = text
        .chars()
        .filter(|c| !matches!(c, '\'' | '\u{2019}'))
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect::<String>()
        .to_lowercase();
    cleaned.split_whitespace().map(str::to_string).collect()
}

/// Extracts the body parts named in a completion.
///
/// Multi-word phrases are matched before single words. Free-form answers
/// additionally go through the lookup table. Unknown words are ignored.
pub fn parse_response(text: &str, kind: PromptKind, lookup: &LookupTable) -> PartSet {
    let tokens = normalize_text(text);
    let mut parts = PartSet::EMPTY;
    let mut i = 0;
    while i < tokens.len() {
        let mut consumed = 1;
        for len in (1..=MAX_PHRASE_WORDS.min(tokens.len() - i)).rev() {
            let phrase = tokens[i..i + len].join(" ");
            let hit = vocabulary(&phrase).map(|p| PartSet::EMPTY.with(p)).or_else(|| {
                (kind == PromptKind::FreeForm)
                    .then(|| lookup.get(&phrase))
                    .flatten()
            });
            if let Some(found) = hit {
                parts = parts.union(found);
                consumed = len;
                break;
            }
        }
        i += consumed;
    }
    parts
}
