//! Corpus loading, pair extraction, split filtering, synthetic pair sampling
//! and dataset export.
//!
//! A corpus directory holds `motions/*.json|*.bin`, `segments.json`, a
//! `parts_cache/` of few-shot completions and an optional `stats.json`.

pub mod toy;

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compose::{self, ComposeError, LabeledMotion};
use crate::motion::io::{self as motion_io, MotionIoError};
use crate::motion::{Annotation, MotionError, MotionSequence, StandardizationStats};
use crate::partlab::{normalize_action, PartLabError, PartLabeler, PartSet, PromptKind, ResponseCache};
use crate::rng::{SeededRng, RNG_VERSION};
use crate::textaug::{self, ConjunctionTable, TextAugError};

pub const SEGMENTS_SCHEMA: &str = "sinc.segments/1";
pub const MANIFEST_SCHEMA: &str = "sinc.manifest/1";
/// Inclusive overlap-length bounds for kept pairs, in frames.
pub const MIN_PAIR_FRAMES: usize = 15;
pub const MAX_PAIR_FRAMES: usize = 600;
/// Prompt kind whose cached answers label corpus actions.
pub const LABEL_PROMPT: PromptKind = PromptKind::ListFewShot;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("corpus has no usable segments")]
    EmptyCorpus,
    #[error("probability {0} is outside [0, 1]")]
    InvalidProbability(f64),
    #[error("segments: {0}")]
    Schema(String),
    #[error("segment {id:?}: {reason}")]
    InvalidSegment { id: String, reason: String },
    #[error("unknown segment {0:?}")]
    UnknownSegment(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    MotionIo(#[from] MotionIoError),
    #[error(transparent)]
    Motion(#[from] MotionError),
    #[error(transparent)]
    PartLab(#[from] PartLabError),
    #[error(transparent)]
    TextAug(#[from] TextAugError),
    #[error(transparent)]
    Compose(#[from] ComposeError),
}

impl PipelineError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        PipelineError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// One labeled frame range `[start_frame, end_frame)` of a motion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledSegment {
    pub id: String,
    pub motion_id: String,
    pub start_frame: usize,
    pub end_frame: usize,
    pub action: String,
    pub parts: PartSet,
}

impl LabeledSegment {
    pub fn len(&self) -> usize {
        self.end_frame - self.start_frame
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn overlap(&self, other: &LabeledSegment) -> Option<(usize, usize)> {
        if self.motion_id != other.motion_id {
            return None;
        }
        let start = self.start_frame.max(other.start_frame);
        let end = self.end_frame.min(other.end_frame);
        (start < end).then_some((start, end))
    }
}

/// `segments.json` row. Missing ids default to `<motion_id>#<row>`; missing
/// parts are resolved from the parts cache.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SegmentRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub motion_id: String,
    pub start_frame: usize,
    pub end_frame: usize,
    pub action: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parts: Option<PartSet>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SegmentsFile {
    pub schema: String,
    pub segments: Vec<SegmentRecord>,
}

pub fn segments_from_json_str(s: &str) -> Result<Vec<SegmentRecord>, PipelineError> {
    let file: SegmentsFile = serde_json::from_str(s).map_err(|e| PipelineError::Schema(e.to_string()))?;
    if file.schema != SEGMENTS_SCHEMA {
        return Err(PipelineError::Schema(format!("unsupported schema {:?}", file.schema)));
    }
    Ok(file.segments)
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub motions: BTreeMap<String, MotionSequence>,
    pub segments: Vec<LabeledSegment>,
    /// Normalized action -> parts.
    pub part_cache: BTreeMap<String, PartSet>,
    pub stats: StandardizationStats,
}

impl Corpus {
    /// Checks segment references and ranges, and fills the part cache.
    pub fn new(
        motions: BTreeMap<String, MotionSequence>,
        segments: Vec<LabeledSegment>,
        stats: StandardizationStats,
    ) -> Result<Self, PipelineError> {
        let mut seen = HashSet::new();
        let mut part_cache = BTreeMap::new();
        for s in &segments {
            let bad = |reason: String| PipelineError::InvalidSegment { id: s.id.clone(), reason };
            if !seen.insert(s.id.as_str()) {
                return Err(bad("duplicate id".into()));
            }
            let m = motions
                .get(&s.motion_id)
                .ok_or_else(|| bad(format!("unknown motion {:?}", s.motion_id)))?;
            if s.start_frame >= s.end_frame || s.end_frame > m.len() {
                return Err(bad(format!(
                    "range {}..{} invalid for motion of {} frames",
                    s.start_frame,
                    s.end_frame,
                    m.len()
                )));
            }
            if normalize_action(&s.action).is_empty() {
                return Err(bad("empty action".into()));
            }
            part_cache.insert(normalize_action(&s.action), s.parts);
        }
        Ok(Corpus {
            motions,
            segments,
            part_cache,
            stats,
        })
    }

    /// Loads a corpus directory; parts come from `segments.json` or, failing
    /// that, from the cached few-shot answers (offline).
    pub fn load(dir: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let dir = dir.as_ref();
        let motions_dir = dir.join("motions");
        let mut paths: Vec<PathBuf> = std::fs::read_dir(&motions_dir)
            .map_err(|e| PipelineError::io(&motions_dir, e))?
            .map(|e| e.map(|e| e.path()).map_err(|err| PipelineError::io(&motions_dir, err)))
            .collect::<Result<_, _>>()?;
        paths.retain(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("json" | "bin")));
        paths.sort();
        let mut motions = BTreeMap::new();
        for p in paths {
            let m = motion_io::read_motion(&p)?;
            if motions.contains_key(&m.id) {
                return Err(PipelineError::Schema(format!("duplicate motion id {:?}", m.id)));
            }
            motions.insert(m.id.clone(), m);
        }

        let seg_path = dir.join("segments.json");
        let text = std::fs::read_to_string(&seg_path).map_err(|e| PipelineError::io(&seg_path, e))?;
        let records = segments_from_json_str(&text)?;

        let labeler = PartLabeler::offline(ResponseCache::at(dir.join("parts_cache")));
        let segments = records
            .into_iter()
            .enumerate()
            .map(|(row, r)| {
                let parts = match r.parts {
                    Some(p) => p,
                    None => labeler.fetch_parts(&r.action, LABEL_PROMPT)?,
                };
                Ok(LabeledSegment {
                    id: r.id.unwrap_or_else(|| format!("{}#{row}", r.motion_id)),
                    motion_id: r.motion_id,
                    start_frame: r.start_frame,
                    end_frame: r.end_frame,
                    action: r.action,
                    parts,
                })
            })
            .collect::<Result<Vec<_>, PipelineError>>()?;

        let stats_path = dir.join("stats.json");
        let stats = if stats_path.exists() {
            motion_io::read_stats(&stats_path)?
        } else {
            StandardizationStats::identity()
        };
        Corpus::new(motions, segments, stats)
    }

    pub fn segment(&self, id: &str) -> Result<&LabeledSegment, PipelineError> {
        self.segments
            .iter()
            .find(|s| s.id == id)
            .ok_or_else(|| PipelineError::UnknownSegment(id.to_string()))
    }

    /// Segments that overlap no other segment of their motion.
    pub fn singles(&self) -> Vec<&LabeledSegment> {
        self.segments
            .iter()
            .filter(|s| !self.segments.iter().any(|o| o.id != s.id && s.overlap(o).is_some()))
            .collect()
    }

    fn slice(&self, seg: &LabeledSegment, start: usize, end: usize) -> Result<MotionSequence, PipelineError> {
        let m = &self.motions[&seg.motion_id];
        Ok(m.slice(seg.id.clone(), start, end)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairKind {
    RealPair,
    SynthPair,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PairSpec {
    pub seg_a: String,
    pub seg_b: String,
    pub kind: PairKind,
    pub seed: u64,
}

/// Overlapping segment pairs on the same motion, in segment order.
pub fn extract_real_pairs(corpus: &Corpus) -> Vec<PairSpec> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, a) in corpus.segments.iter().enumerate() {
        for b in &corpus.segments[i + 1..] {
            let Some(range) = a.overlap(b) else { continue };
            let (x, y) = unordered(&a.action, &b.action);
            if seen.insert((x, y, a.motion_id.clone(), range)) {
                out.push(PairSpec {
                    seg_a: a.id.clone(),
                    seg_b: b.id.clone(),
                    kind: PairKind::RealPair,
                    seed: 0,
                });
            }
        }
    }
    out
}

/// Normalized action pair with a fixed order.
pub fn unordered(a: &str, b: &str) -> (String, String) {
    let (a, b) = (normalize_action(a), normalize_action(b));
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitRole {
    Train,
    Eval,
}

/// Frames a pair contributes: the overlap for real pairs, the shorter
/// segment for synthetic ones.
pub fn pair_length(corpus: &Corpus, spec: &PairSpec) -> Result<usize, PipelineError> {
    let (a, b) = (corpus.segment(&spec.seg_a)?, corpus.segment(&spec.seg_b)?);
    Ok(match spec.kind {
        PairKind::RealPair => a.overlap(b).map_or(0, |(s, e)| e - s),
        PairKind::SynthPair => a.len().min(b.len()),
    })
}

pub fn filter_split(
    corpus: &Corpus,
    pairs: &[PairSpec],
    role: SplitRole,
    seen: &HashSet<(String, String)>,
) -> Result<Vec<PairSpec>, PipelineError> {
    filter_split_with_bounds(corpus, pairs, role, seen, MIN_PAIR_FRAMES, MAX_PAIR_FRAMES)
}

pub fn filter_split_with_bounds(
    corpus: &Corpus,
    pairs: &[PairSpec],
    role: SplitRole,
    seen: &HashSet<(String, String)>,
    min_frames: usize,
    max_frames: usize,
) -> Result<Vec<PairSpec>, PipelineError> {
    let mut kept = Vec::new();
    for p in pairs {
        let len = pair_length(corpus, p)?;
        if !(min_frames..=max_frames).contains(&len) {
            continue;
        }
        if role == SplitRole::Eval {
            let key = unordered(&corpus.segment(&p.seg_a)?.action, &corpus.segment(&p.seg_b)?.action);
            if key.0 == "stand" || key.1 == "stand" || seen.contains(&key) {
                continue;
            }
        }
        kept.push(p.clone());
    }
    Ok(kept)
}

/// Unordered action pairs of `pairs`, for excluding them from evaluation.
pub fn seen_pairs(corpus: &Corpus, pairs: &[PairSpec]) -> Result<HashSet<(String, String)>, PipelineError> {
    pairs
        .iter()
        .map(|p| Ok(unordered(&corpus.segment(&p.seg_a)?.action, &corpus.segment(&p.seg_b)?.action)))
        .collect()
}

/// Pairs single-action segments with compatible partners.
///
/// Up to `n_singles` singles are visited in a seeded order; each is paired with
/// probability `p` with a partner drawn uniformly among the compatible singles.
pub fn sample_synth_pairs(
    corpus: &Corpus,
    p: f64,
    seed: u64,
    n_singles: usize,
) -> Result<Vec<PairSpec>, PipelineError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(PipelineError::InvalidProbability(p));
    }
    let singles = corpus.singles();
    if singles.is_empty() {
        return Err(PipelineError::EmptyCorpus);
    }
    let mut rng = SeededRng::new(seed);
    let mut order: Vec<usize> = (0..singles.len()).collect();
    rng.shuffle(&mut order);
    let mut out = Vec::new();
    for &i in order.iter().take(n_singles) {
        let a = singles[i];
        if rng.next_f64() >= p {
            continue;
        }
        let partners: Vec<&LabeledSegment> = singles
            .iter()
            .copied()
            .filter(|b| !a.parts.is_empty() && !b.parts.is_empty() && compose::compatible(a.parts, b.parts))
            .collect();
        if partners.is_empty() {
            continue;
        }
        let b = partners[rng.below(partners.len())];
        out.push(PairSpec {
            seg_a: a.id.clone(),
            seg_b: b.id.clone(),
            kind: PairKind::SynthPair,
            seed: rng.next_u64(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestItem {
    pub id: String,
    pub kind: PairKind,
    pub actions: [String; 2],
    /// Segment ids of the two sources.
    pub parents: [String; 2],
    pub frames: usize,
    pub description: String,
    pub motion: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sidecar: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedItem {
    pub index: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: String,
    pub rng: String,
    pub aug_seed: u64,
    pub items: Vec<ManifestItem>,
    pub skipped: usize,
    pub skipped_items: Vec<SkippedItem>,
}

impl Manifest {
    pub fn emitted(&self, kind: PairKind) -> usize {
        self.items.iter().filter(|i| i.kind == kind).count()
    }
}

pub fn manifest_from_json_str(s: &str) -> Result<Manifest, PipelineError> {
    let m: Manifest = serde_json::from_str(s).map_err(|e| PipelineError::Schema(e.to_string()))?;
    if m.schema != MANIFEST_SCHEMA {
        return Err(PipelineError::Schema(format!("unsupported manifest schema {:?}", m.schema)));
    }
    Ok(m)
}

enum Outcome {
    Emitted(ManifestItem),
    Skipped(String),
}

/// Writes one motion (and sidecar for synthetic pairs) per spec under
/// `out_dir/motions` and `out_dir/sidecars`, then `out_dir/manifest.json`.
///
/// Specs are processed in parallel; each uses a seed derived from `aug_seed`
/// and its index, and the manifest keeps spec order.
pub fn build_dataset(
    corpus: &Corpus,
    specs: &[PairSpec],
    out_dir: impl AsRef<Path>,
    aug_seed: u64,
) -> Result<Manifest, PipelineError> {
    let out_dir = out_dir.as_ref();
    for sub in ["motions", "sidecars"] {
        let d = out_dir.join(sub);
        std::fs::create_dir_all(&d).map_err(|e| PipelineError::io(&d, e))?;
    }
    let table = ConjunctionTable::builtin();
    let outcomes: Vec<Result<Outcome, PipelineError>> = specs
        .par_iter()
        .enumerate()
        .map(|(i, spec)| build_item(corpus, spec, i, out_dir, aug_seed, &table))
        .collect();

    let mut items = Vec::new();
    let mut skipped_items = Vec::new();
    for (index, o) in outcomes.into_iter().enumerate() {
        match o? {
            Outcome::Emitted(item) => items.push(item),
            Outcome::Skipped(reason) => {
                log::info!("skipping pair {index}: {reason}");
                skipped_items.push(SkippedItem { index, reason });
            }
        }
    }
    let manifest = Manifest {
        schema: MANIFEST_SCHEMA.into(),
        rng: RNG_VERSION.into(),
        aug_seed,
        skipped: skipped_items.len(),
        items,
        skipped_items,
    };
    let path = out_dir.join("manifest.json");
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| PipelineError::io(&path, e))?;
    Ok(manifest)
}

fn build_item(
    corpus: &Corpus,
    spec: &PairSpec,
    index: usize,
    out_dir: &Path,
    aug_seed: u64,
    table: &ConjunctionTable,
) -> Result<Outcome, PipelineError> {
    let a = corpus.segment(&spec.seg_a)?;
    let b = corpus.segment(&spec.seg_b)?;
    let id = match spec.kind {
        PairKind::RealPair => format!("real-{index:05}"),
        PairKind::SynthPair => format!("synth-{index:05}"),
    };
    let motion_rel = format!("motions/{id}.bin");
    let item = match spec.kind {
        PairKind::RealPair => {
            let Some((start, end)) = a.overlap(b) else {
                return Ok(Outcome::Skipped(format!("segments {} and {} do not overlap", a.id, b.id)));
            };
            let mut motion = corpus.slice(a, start, end)?;
            motion.id = id.clone();
            motion.annotations = [a, b]
                .iter()
                .map(|s| Annotation {
                    text: s.action.clone(),
                    start_frame: 0,
                    end_frame: end - start,
                })
                .collect();
            motion_io::write_motion(out_dir.join(&motion_rel), &motion)?;
            let labels = [a.action.clone(), b.action.clone()];
            ManifestItem {
                id,
                kind: spec.kind,
                description: textaug::test_description(&labels, "while", table)?,
                actions: labels,
                parents: [a.id.clone(), b.id.clone()],
                frames: end - start,
                motion: motion_rel,
                sidecar: None,
            }
        }
        PairKind::SynthPair => {
            let la = LabeledMotion::new(corpus.slice(a, a.start_frame, a.end_frame)?, &a.action, a.parts);
            let lb = LabeledMotion::new(corpus.slice(b, b.start_frame, b.end_frame)?, &b.action, b.parts);
            let result = match compose::compose_strict(&la, &lb) {
                Ok(r) => r,
                Err(e @ (ComposeError::Incompatible { .. } | ComposeError::EmptyPartSet(_))) => {
                    return Ok(Outcome::Skipped(format!("{} + {}: {e}", a.id, b.id)));
                }
                Err(e) => return Err(e.into()),
            };
            let labels = [result.actions.0.clone(), result.actions.1.clone()];
            let text_seed = SeededRng::derive(aug_seed, index as u64).next_u64();
            let description = textaug::compose_description(&labels, text_seed, table)?;
            let mut motion = result.motion.clone();
            motion.id = id.clone();
            motion_io::write_motion(out_dir.join(&motion_rel), &motion)?;
            let mut sidecar = result.sidecar();
            sidecar.description = Some(description.clone());
            let sidecar_rel = format!("sidecars/{id}.json");
            let path = out_dir.join(&sidecar_rel);
            let mut text = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
            text.push('\n');
            std::fs::write(&path, text).map_err(|e| PipelineError::io(&path, e))?;
            let parents = if result.swapped {
                [b.id.clone(), a.id.clone()]
            } else {
                [a.id.clone(), b.id.clone()]
            };
            ManifestItem {
                id,
                kind: spec.kind,
                actions: labels,
                parents,
                frames: motion.len(),
                description,
                motion: motion_rel,
                sidecar: Some(sidecar_rel),
            }
        }
    };
    Ok(Outcome::Emitted(item))
}
