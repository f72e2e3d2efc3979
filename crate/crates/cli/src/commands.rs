use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use sinc_core::compose::{self, ComposeMode, LabeledMotion, Source};
use sinc_core::geometry::Skeleton;
use sinc_core::metrics::{self, CommandEmbedder, JointTrajectory, MetricReport};
use sinc_core::motion::io::{read_motion, write_motion};
use sinc_core::motion::MotionSequence;
use sinc_core::partlab::{
    label_accuracy, load_annotations, AccuracyReport, BodyPart, CompletionClient, HttpCompletionClient,
    HttpConfig, LookupTable, PartLabeler, PartSet, ResponseCache,
};
use sinc_core::pipeline::{self, toy, Corpus, SplitRole};
use sinc_core::textaug::{self, ConjunctionTable};

use crate::{AugmentArgs, ComposeArgs, EvaluateArgs, LabelPartsArgs, ModeArg, SynthDatasetArgs, ToyCorpusArgs};

const METRICS_SCHEMA: &str = "sinc.metrics/1";

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn parts_label(parts: PartSet) -> String {
    parts.iter().map(BodyPart::key).collect::<Vec<_>>().join(",")
}

#[derive(Serialize)]
struct LabelReport {
    mode: String,
    predictions: BTreeMap<String, PartSet>,
    #[serde(skip_serializing_if = "Option::is_none")]
    accuracy: Option<AccuracyReport>,
}

pub fn label_parts(args: LabelPartsArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.actions)
        .with_context(|| format!("reading {}", args.actions.display()))?;
    let actions: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
    let annotations = match &args.annotations {
        Some(p) => Some(load_annotations(p)?),
        None => None,
    };

    let client: Option<Arc<dyn CompletionClient>> = if args.offline {
        None
    } else {
        match HttpConfig::from_env() {
            Some(mut config) => {
                if let Some(url) = &args.base_url {
                    config.base_url = url.clone();
                }
                if let Some(model) = &args.model {
                    config.model = model.clone();
                }
                Some(Arc::new(HttpCompletionClient::new(config)))
            }
            None => {
                log::warn!("no API key set; answering from the cache only");
                None
            }
        }
    };
    let labeler = PartLabeler::new(ResponseCache::at(&args.cache), client, LookupTable::builtin());

    let mut predictions = BTreeMap::new();
    for action in &actions {
        let parts = labeler.fetch_parts(action, args.mode)?;
        println!("{action}\t{}", parts_label(parts));
        predictions.insert(action.to_string(), parts);
    }

    let accuracy = match &annotations {
        Some(anns) => {
            let preds: HashMap<String, PartSet> = predictions.clone().into_iter().collect();
            let report = label_accuracy(&preds, anns)?;
            println!("\n{report}");
            Some(report)
        }
        None => None,
    };
    if let Some(path) = &args.report {
        write_json(path, &LabelReport { mode: args.mode.to_string(), predictions, accuracy })?;
    }
    Ok(())
}

fn default_action(m: &MotionSequence) -> String {
    m.annotations.first().map_or_else(|| m.id.clone(), |a| a.text.clone())
}

pub fn compose(args: ComposeArgs) -> Result<()> {
    let parts_a = PartSet::parse_list(&args.parts_a)?;
    let parts_b = PartSet::parse_list(&args.parts_b)?;
    let a = read_motion(&args.a)?;
    let b = read_motion(&args.b)?;
    let action_a = args.action_a.clone().unwrap_or_else(|| default_action(&a));
    let action_b = args.action_b.clone().unwrap_or_else(|| default_action(&b));
    let mode = match args.mode {
        ModeArg::Strict => ComposeMode::Strict,
        ModeArg::Override => ComposeMode::Override,
    };
    let result = compose::compose(
        &LabeledMotion::new(a, action_a, parts_a),
        &LabeledMotion::new(b, action_b, parts_b),
        mode,
    )?;
    write_motion(&args.out, &result.motion)?;
    let sidecar_path = args.out.with_extension("sidecar.json");
    write_json(&sidecar_path, &result.sidecar())?;

    println!(
        "A = {:?} ({}), B = {:?} ({}){}",
        result.actions.0,
        parts_label(result.parts.0),
        result.actions.1,
        parts_label(result.parts.1),
        if result.swapped { ", inputs swapped" } else { "" }
    );
    for part in BodyPart::REPORT_ORDER {
        let sources: HashSet<Source> = part
            .joints()
            .iter()
            .map(|&j| result.source_map.joints[j])
            .collect();
        let from = if sources.len() == 1 && sources.contains(&Source::B) { "B" } else { "A" };
        println!("  {:<11} <- {from}", part.title());
    }
    println!("  {:<11} <- {:?}", "Translation", result.source_map.translation);
    println!("{} frames written to {}", result.motion.len(), args.out.display());
    Ok(())
}

pub fn synth_dataset(args: SynthDatasetArgs) -> Result<()> {
    let corpus = Corpus::load(&args.corpus).with_context(|| format!("loading corpus {}", args.corpus.display()))?;
    let n = args.n_singles.unwrap_or(usize::MAX);
    let mut specs = pipeline::sample_synth_pairs(&corpus, args.p, args.seed, n)?;
    if args.with_real_pairs {
        let real = pipeline::extract_real_pairs(&corpus);
        specs.extend(pipeline::filter_split(&corpus, &real, SplitRole::Train, &HashSet::new())?);
    }
    let manifest = pipeline::build_dataset(&corpus, &specs, &args.out, args.aug_seed)?;
    println!(
        "emitted {} (synthetic {}, real {}), skipped {}",
        manifest.items.len(),
        manifest.emitted(pipeline::PairKind::SynthPair),
        manifest.emitted(pipeline::PairKind::RealPair),
        manifest.skipped
    );
    Ok(())
}

/// Motion files in `dir` (or `dir/motions`) keyed by file stem.
fn motion_files(dir: &Path) -> Result<BTreeMap<String, PathBuf>> {
    let nested = dir.join("motions");
    let dir = if nested.is_dir() { nested } else { dir.to_path_buf() };
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(&dir).with_context(|| format!("reading {}", dir.display()))? {
        let path = entry?.path();
        if matches!(path.extension().and_then(|e| e.to_str()), Some("json" | "bin")) {
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
            out.insert(stem, path);
        }
    }
    Ok(out)
}

#[derive(Serialize)]
struct EvalReport {
    schema: &'static str,
    items: BTreeMap<String, MetricReport>,
    mean: Option<MetricReport>,
}

pub fn evaluate(args: EvaluateArgs) -> Result<()> {
    let gen = motion_files(&args.gen)?;
    let gt = motion_files(&args.gt)?;
    let unmatched: Vec<&String> = gen.keys().filter(|k| !gt.contains_key(*k))
        .chain(gt.keys().filter(|k| !gen.contains_key(*k)))
        .collect();
    if !unmatched.is_empty() {
        let list: Vec<&str> = unmatched.iter().map(|s| s.as_str()).collect();
        bail!("ids present on only one side: {}", list.join(", "));
    }
    let skeleton = match &args.skeleton {
        Some(p) => Skeleton::load(p)?,
        None => Skeleton::smpl22(),
    };
    let ids: Vec<String> = gen.keys().cloned().collect();

    let scores: Option<Vec<f64>> = if let Some(path) = &args.embeddings {
        let keys: Vec<String> = ids.iter().flat_map(|id| [format!("gen/{id}"), format!("gt/{id}")]).collect();
        let emb = metrics::load_embeddings(path, &keys)?;
        Some(
            ids.iter()
                .map(|id| metrics::temos_score(&emb[&format!("gt/{id}")], &emb[&format!("gen/{id}")]))
                .collect::<Result<_, _>>()?,
        )
    } else if let Some(cmd) = &args.embed_cmd {
        let embedder = CommandEmbedder::new(cmd.clone());
        let gen_paths: Vec<PathBuf> = ids.iter().map(|id| gen[id].clone()).collect();
        let gt_paths: Vec<PathBuf> = ids.iter().map(|id| gt[id].clone()).collect();
        let (fg, ft) = (embedder.embed(&gen_paths)?, embedder.embed(&gt_paths)?);
        Some(
            ft.iter()
                .zip(&fg)
                .map(|(t, g)| metrics::temos_score(t, g))
                .collect::<Result<_, _>>()?,
        )
    } else {
        None
    };

    let mut items = BTreeMap::new();
    for (k, id) in ids.iter().enumerate() {
        let tg = JointTrajectory::from_motion(&read_motion(&gen[id])?, &skeleton)?;
        let tt = JointTrajectory::from_motion(&read_motion(&gt[id])?, &skeleton)?;
        let n = tg.len().min(tt.len());
        let mut report = MetricReport::compute(&tg.truncated(n), &tt.truncated(n))
            .with_context(|| format!("scoring {id}"))?;
        report.temos_score = scores.as_ref().map(|s| s[k]);
        items.insert(id.clone(), report);
    }
    let all: Vec<MetricReport> = items.values().copied().collect();
    let mean = MetricReport::mean(&all);

    let mut rows: Vec<(String, MetricReport)> = items.iter().map(|(k, v)| (k.clone(), *v)).collect();
    if let Some(m) = mean {
        rows.push(("mean".into(), m));
    }
    print!("{}", metrics::format_table(&rows));
    write_json(&args.report, &EvalReport { schema: METRICS_SCHEMA, items, mean })
}

pub fn augment(args: AugmentArgs) -> Result<()> {
    let table = match &args.table {
        Some(p) => ConjunctionTable::load(p)?,
        None => ConjunctionTable::builtin(),
    };
    let text = match &args.conjunction {
        Some(c) => textaug::test_description(&args.labels, c, &table)?,
        None => textaug::compose_description(&args.labels, args.seed.unwrap_or(0), &table)?,
    };
    println!("{text}");
    Ok(())
}

pub fn toy_corpus(args: ToyCorpusArgs) -> Result<()> {
    let config = toy::ToyConfig { n_motions: args.motions, seed: args.seed, ..Default::default() };
    let segments = toy::generate(&args.out, config)?;
    println!("{} motions, {} segments written to {}", args.motions, segments.len(), args.out.display());
    Ok(())
}
