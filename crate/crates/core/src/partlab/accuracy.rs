use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{normalize_action, BodyPart, PartLabError, PartSet};

/// Ground-truth involvement of a part in an action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mark {
    Yes,
    No,
    /// Acceptable either way.
    Sometimes,
}

impl Mark {
    /// 1 for agreement, 0 for disagreement, 0.5 for `Sometimes` regardless.
    pub fn score(self, selected: bool) -> f64 {
        match (self, selected) {
            (Mark::Sometimes, _) => 0.5,
            (Mark::Yes, true) | (Mark::No, false) => 1.0,
            (Mark::Yes, false) | (Mark::No, true) => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartAnnotation {
    pub action: String,
    pub marks: BTreeMap<BodyPart, Mark>,
}

impl PartAnnotation {
    pub fn new(action: impl Into<String>, marks: [Mark; 6]) -> Self {
        PartAnnotation {
            action: action.into(),
            marks: BodyPart::ALL.into_iter().zip(marks).collect(),
        }
    }

    pub fn mark(&self, part: BodyPart) -> Option<Mark> {
        self.marks.get(&part).copied()
    }

    fn validate(&self) -> Result<(), PartLabError> {
        if let Some(missing) = BodyPart::ALL.into_iter().find(|p| !self.marks.contains_key(p)) {
            return Err(PartLabError::Schema(format!(
                "annotation for {:?} is missing a mark for {missing}",
                self.action
            )));
        }
        if self.action.trim().is_empty() {
            return Err(PartLabError::Schema("annotation with empty action".into()));
        }
        Ok(())
    }
}

/// Parses `[{action, marks: {left_arm: "yes"|"no"|"sometimes", ...}}]`.
pub fn annotations_from_json_str(s: &str) -> Result<Vec<PartAnnotation>, PartLabError> {
    let anns: Vec<PartAnnotation> =
        serde_json::from_str(s).map_err(|e| PartLabError::Schema(format!("annotations: {e}")))?;
    for a in &anns {
        a.validate()?;
    }
    Ok(anns)
}

pub fn load_annotations(path: impl AsRef<Path>) -> Result<Vec<PartAnnotation>, PartLabError> {
    let path = path.as_ref();
    let s = std::fs::read_to_string(path).map_err(|e| PartLabError::io(path, e))?;
    annotations_from_json_str(&s)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AccuracyReport {
    pub per_part: BTreeMap<BodyPart, f64>,
    pub mean: f64,
    pub n_actions: usize,
}

impl AccuracyReport {
    pub fn part(&self, part: BodyPart) -> f64 {
        self.per_part[&part]
    }

    pub fn header() -> String {
        let mut cols: Vec<String> = BodyPart::REPORT_ORDER
            .iter()
            .map(|p| format!("{:>9}", p.title()))
            .collect();
        cols.push(format!("{:>9}", "Mean"));
        cols.join(" ")
    }
}

impl fmt::Display for AccuracyReport {
    /// Table columns: Global, Torso, Left arm, Right arm, Left leg, Right leg, Mean.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", Self::header())?;
        let mut cells: Vec<String> = BodyPart::REPORT_ORDER
            .iter()
            .map(|p| format!("{:>9.3}", self.part(*p)))
            .collect();
        cells.push(format!("{:>9.3}", self.mean));
        write!(f, "{}", cells.join(" "))
    }
}

/// Scores predicted part sets against Yes/No/Sometimes annotations.
///
/// Actions are matched after lowercasing and whitespace normalization.
pub fn label_accuracy(
    predictions: &HashMap<String, PartSet>,
    annotations: &[PartAnnotation],
) -> Result<AccuracyReport, PartLabError> {
    if annotations.is_empty() {
        return Err(PartLabError::NoAnnotations);
    }
    let normalized: HashMap<String, PartSet> = predictions
        .iter()
        .map(|(k, v)| (normalize_action(k), *v))
        .collect();
    let mut totals = [0.0f64; 6];
    for ann in annotations {
        ann.validate()?;
        let predicted = normalized
            .get(&normalize_action(&ann.action))
            .ok_or_else(|| PartLabError::MissingPrediction(ann.action.clone()))?;
        for part in BodyPart::ALL {
            let mark = ann.mark(part).expect("validated");
            totals[part.index()] += mark.score(predicted.contains(part));
        }
    }
    let n = annotations.len() as f64;
    let per_part: BTreeMap<BodyPart, f64> = BodyPart::ALL
        .into_iter()
        .map(|p| (p, totals[p.index()] / n))
        .collect();
    let mean = per_part.values().sum::<f64>() / 6.0;
    Ok(AccuracyReport {
        per_part,
        mean,
        n_actions: annotations.len(),
    })
}
