//! Compositional text descriptions built from several action labels.
//!
//! Labels are shuffled and joined with a conjunction drawn from a table; some
//! conjunctions (`while`, `during`) put the following clause in gerund form.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::SeededRng;

pub const CONJUNCTION_SCHEMA: &str = "sinc.conjunctions/1";

const DEFAULT_CONJUNCTIONS_JSON: &str = include_str!("../data/conjunctions.json");
const DEFAULT_EXCEPTIONS_JSON: &str = include_str!("../data/gerund_exceptions.json");

#[derive(Debug, Error)]
pub enum TextAugError {
    #[error("label list is empty")]
    EmptyLabelList,
    #[error("label {0} is empty")]
    EmptyLabel(usize),
    #[error("unknown conjunction {0:?}")]
    UnknownConjunction(String),
    #[error("conjunction table: {0}")]
    Schema(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Placement {
    /// `A <text> B`
    Infix,
    /// `A <before> B <after>` when the text contains `...`, else `A and B <text>`.
    Wrapped,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conjunction {
    pub text: String,
    pub requires_gerund: bool,
    pub placement: Placement,
}

impl Conjunction {
    fn render(&self, head: &str, tail: &str) -> String {
        let joined = match self.placement {
            Placement::Infix => format!("{head} {} {tail}", self.text),
            Placement::Wrapped => match self.text.split_once("...") {
                Some((before, after)) => {
                    format!("{head} {} {tail} {}", before.trim(), after.trim())
                }
                None => format!("{head} and {tail} {}", self.text),
            },
        };
        joined.split_whitespace().collect::<Vec<_>>().join(" ")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConjunctionTable {
    pub entries: Vec<Conjunction>,
}

#[derive(Deserialize)]
struct ConjunctionFile {
    schema: String,
    entries: Vec<Conjunction>,
}

impl ConjunctionTable {
    pub fn builtin() -> Self {
        Self::from_json_str(DEFAULT_CONJUNCTIONS_JSON).expect("bundled conjunction table is valid")
    }

    pub fn new(entries: Vec<Conjunction>) -> Result<Self, TextAugError> {
        if entries.is_empty() {
            return Err(TextAugError::Schema("no entries".into()));
        }
        for e in &entries {
            let dots = e.text.matches("...").count();
            let ok = !e.text.trim().is_empty()
                && match e.placement {
                    Placement::Infix => dots == 0,
                    Placement::Wrapped => dots <= 1,
                };
            if !ok {
                return Err(TextAugError::Schema(format!("bad template {:?}", e.text)));
            }
        }
        Ok(ConjunctionTable { entries })
    }

    pub fn from_json_str(s: &str) -> Result<Self, TextAugError> {
        let file: ConjunctionFile =
            serde_json::from_str(s).map_err(|e| TextAugError::Schema(e.to_string()))?;
        if file.schema != CONJUNCTION_SCHEMA {
            return Err(TextAugError::Schema(format!("unsupported schema {:?}", file.schema)));
        }
        Self::new(file.entries)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TextAugError> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|source| TextAugError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json_str(&s)
    }

    pub fn find(&self, text: &str) -> Option<&Conjunction> {
        let wanted = normalize(text);
        self.entries.iter().find(|e| normalize(&e.text) == wanted)
    }
}

/// Rule-based gerund inflection with an exception list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GerundInflector {
    exceptions: BTreeMap<String, String>,
}

impl GerundInflector {
    pub fn builtin() -> &'static Self {
        static BUILTIN: OnceLock<GerundInflector> = OnceLock::new();
        BUILTIN.get_or_init(|| {
            Self::from_json_str(DEFAULT_EXCEPTIONS_JSON).expect("bundled exceptions are valid")
        })
    }

    /// JSON object `verb -> gerund`.
    pub fn from_json_str(s: &str) -> Result<Self, TextAugError> {
        let exceptions: BTreeMap<String, String> =
            serde_json::from_str(s).map_err(|e| TextAugError::Schema(e.to_string()))?;
        Ok(GerundInflector { exceptions })
    }

    /// Inflects the first word of a verb phrase; the rest is kept verbatim.
    pub fn inflect(&self, phrase: &str) -> String {
        let phrase = phrase.trim_start();
        let split = phrase.find(char::is_whitespace).unwrap_or(phrase.len());
        let (verb, rest) = phrase.split_at(split);
        format!("{}{rest}", self.inflect_word(verb))
    }

    fn inflect_word(&self, word: &str) -> String {
        if word.is_empty() {
            return String::new();
        }
        let lower = word.to_lowercase();
        if let Some(g) = self.exceptions.get(&lower) {
            return g.clone();
        }
        if lower.ends_with("ing") && lower.chars().count() >= 5 {
            return word.to_string();
        }
        let chars: Vec<char> = lower.chars().collect();
        let n = chars.len();
        if lower.ends_with("ie") {
            return format!("{}ying", &word[..word.len() - 2]);
        }
        if ["ee", "ye", "oe"].iter().any(|s| lower.ends_with(s)) {
            return format!("{word}ing");
        }
        if n > 2 && lower.ends_with('e') {
            return format!("{}ing", &word[..word.len() - 1]);
        }
        if n >= 3
            && is_monosyllabic(&chars)
            && !is_vowel(chars[n - 3])
            && is_vowel(chars[n - 2])
            && !is_vowel(chars[n - 1])
            && !matches!(chars[n - 1], 'w' | 'x' | 'y')
        {
            return format!("{word}{}ing", chars[n - 1]);
        }
        format!("{word}ing")
    }
}

fn is_vowel(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u')
}

fn is_monosyllabic(chars: &[char]) -> bool {
    let mut groups = 0;
    let mut prev = false;
    for &c in chars {
        let v = is_vowel(c);
        if v && !prev {
            groups += 1;
        }
        prev = v;
    }
    groups == 1
}

/// Gerund form of the first word, using the bundled exception list.
pub fn inflect_gerund(verb_phrase: &str) -> String {
    GerundInflector::builtin().inflect(verb_phrase)
}

fn normalize(label: &str) -> String {
    label
        .split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

fn normalized_labels(labels: &[String]) -> Result<Vec<String>, TextAugError> {
    if labels.is_empty() {
        return Err(TextAugError::EmptyLabelList);
    }
    labels
        .iter()
        .enumerate()
        .map(|(i, l)| {
            let n = normalize(l);
            if n.is_empty() {
                Err(TextAugError::EmptyLabel(i))
            } else {
                Ok(n)
            }
        })
        .collect()
}

/// Joins labels in order: the first label is the main clause and the rest
/// follow the conjunction, joined with `and`.
fn join_with(labels: &[String], conj: &Conjunction) -> String {
    let tail: Vec<String> = labels[1..]
        .iter()
        .map(|l| if conj.requires_gerund { inflect_gerund(l) } else { l.clone() })
        .collect();
    conj.render(&labels[0], &tail.join(" and "))
}

/// Seeded free-form description of simultaneous actions.
pub fn compose_description(
    labels: &[String],
    seed: u64,
    table: &ConjunctionTable,
) -> Result<String, TextAugError> {
    let mut labels = normalized_labels(labels)?;
    if labels.len() == 1 {
        return Ok(labels.remove(0));
    }
    let mut rng = SeededRng::new(seed);
    rng.shuffle(&mut labels);
    let conj = &table.entries[rng.below(table.entries.len())];
    Ok(join_with(&labels, conj))
}

/// Deterministic description with labels in the given order and a named conjunction.
pub fn test_description(
    labels: &[String],
    conjunction: &str,
    table: &ConjunctionTable,
) -> Result<String, TextAugError> {
    let conj = table
        .find(conjunction)
        .ok_or_else(|| TextAugError::UnknownConjunction(conjunction.to_string()))?;
    let mut labels = normalized_labels(labels)?;
    if labels.len() == 1 {
        return Ok(labels.remove(0));
    }
    Ok(join_with(&labels, conj))
}
