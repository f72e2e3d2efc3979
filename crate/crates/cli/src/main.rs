//! `sinc`: label body parts, compose motions, build synthetic datasets,
//! evaluate generated motions and augment text labels.
//!
//! Exit codes: 0 success, 1 I/O or schema error, 2 missing cached or remote
//! resource, 3 incompatible body parts.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sinc_core::compose::ComposeError;
use sinc_core::partlab::{PartLabError, PromptKind, CACHE_DIR_ENV};
use sinc_core::pipeline::PipelineError;

#[derive(Parser, Debug)]
#[command(name = "sinc", version, about = "Spatial composition of 3D human motions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Label actions with body parts through the completion cache.
    LabelParts(LabelPartsArgs),
    /// Stitch the body parts of two motions into one.
    Compose(ComposeArgs),
    /// Sample compatible single-action pairs from a corpus and export them.
    SynthDataset(SynthDatasetArgs),
    /// Positional metrics (and optionally the embedding score) of generated motions.
    Evaluate(EvaluateArgs),
    /// Combine action labels into one description.
    Augment(AugmentArgs),
    /// Write a small procedural corpus for trying the pipeline.
    ToyCorpus(ToyCorpusArgs),
}

#[derive(Args, Debug)]
struct LabelPartsArgs {
    /// Text file with one action per line.
    #[arg(long)]
    actions: PathBuf,
    /// Prompt style: freeform, list or fewshot.
    #[arg(long, default_value = "fewshot")]
    mode: PromptKind,
    #[arg(long, env = CACHE_DIR_ENV)]
    cache: PathBuf,
    /// Never contact the completion service.
    #[arg(long)]
    offline: bool,
    /// Yes/No/Sometimes annotations to score the labels against.
    #[arg(long)]
    annotations: Option<PathBuf>,
    /// Write predictions (and accuracy) as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    base_url: Option<String>,
    #[arg(long)]
    model: Option<String>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ModeArg {
    Strict,
    Override,
}

#[derive(Args, Debug)]
struct ComposeArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    /// Comma-separated parts, e.g. `left_leg,right_leg,global`.
    #[arg(long)]
    parts_a: String,
    #[arg(long)]
    parts_b: String,
    /// Action text of A; defaults to its first annotation or its id.
    #[arg(long)]
    action_a: Option<String>,
    #[arg(long)]
    action_b: Option<String>,
    #[arg(long, value_enum, default_value = "strict")]
    mode: ModeArg,
    /// Output motion (.json or .bin); the sidecar goes next to it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SynthDatasetArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Probability of pairing each single-action segment.
    #[arg(long)]
    p: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    aug_seed: u64,
    /// Visit at most this many single-action segments.
    #[arg(long)]
    n_singles: Option<usize>,
    /// Also export real overlapping pairs that pass the training filter.
    #[arg(long)]
    with_real_pairs: bool,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// Generated motions (a directory of motion files, or a dataset directory).
    #[arg(long)]
    gen: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    /// JSON map with keys `gen/<id>` and `gt/<id>`.
    #[arg(long, conflicts_with = "embed_cmd")]
    embeddings: Option<PathBuf>,
    /// Shell command reading motion paths on stdin and printing one vector per line.
    #[arg(long)]
    embed_cmd: Option<String>,
    #[arg(long)]
    report: PathBuf,
    #[arg(long)]
    skeleton: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AugmentArgs {
    #[arg(long, num_args = 1.., required = true)]
    labels: Vec<String>,
    #[arg(long, conflicts_with = "conjunction")]
    seed: Option<u64>,
    /// Use this conjunction with the labels in the given order.
    #[arg(long)]
    conjunction: Option<String>,
    /// Custom conjunction table.
    #[arg(long)]
    table: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ToyCorpusArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 50)]
    motions: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        let part = cause.downcast_ref::<PartLabError>().or_else(|| match cause.downcast_ref() {
            Some(PipelineError::PartLab(e)) => Some(e),
            _ => None,
        });
        if let Some(PartLabError::CacheMiss { .. } | PartLabError::ServiceUnavailable(_)) = part {
            return 2;
        }
        let compose = cause.downcast_ref::<ComposeError>().or_else(|| match cause.downcast_ref() {
            Some(PipelineError::Compose(e)) => Some(e),
            _ => None,
        });
        if let Some(ComposeError::Incompatible { .. }) = compose {
            return 3;
        }
    }
    1
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::LabelParts(a) => commands::label_parts(a),
        Command::Compose(a) => commands::compose(a),
        Command::SynthDataset(a) => commands::synth_dataset(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Augment(a) => commands::augment(a),
        Command::ToyCorpus(a) => commands::toy_corpus(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
