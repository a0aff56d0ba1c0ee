use std::path::PathBuf;

use clap::Args;
use social_reward::curation::{Split, TripletRecord};
use social_reward::encoder::load_checkpoint;
use social_reward::eval::{self, EvalReport, PrecomputedScorer, Scorer};
use social_reward::jsonl;
use social_reward::pixels::UriImageSource;
use social_reward::svg;

use crate::commands::load_store;
use crate::errors::{CliError, CliResult};
use crate::logging;
use crate::runfiles::RunContext;

#[derive(Args)]
pub struct EvalArgs {
    #[arg(long)]
    events: PathBuf,
    #[arg(long)]
    images: PathBuf,
    #[arg(long)]
    prompts: PathBuf,
    #[arg(long)]
    triplets: PathBuf,
    #[arg(long, short = 'o')]
    out: PathBuf,
    /// Encoder checkpoint to evaluate.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Name for the checkpoint scorer in reports.
    #[arg(long, default_value = "social-reward-reference")]
    scorer_name: String,
    /// Precomputed scores.jsonl holding one or more third-party scorers.
    #[arg(long)]
    scores: Option<PathBuf>,
    /// train | val | test | all
    #[arg(long, default_value = "test")]
    split: String,
    /// Also emit an SVG bar chart of the accuracy table.
    #[arg(long)]
    svg: bool,
}

fn split_filter(name: &str) -> CliResult<Option<Split>> {
    match name {
        "train" => Ok(Some(Split::Train)),
        "val" => Ok(Some(Split::Val)),
        "test" => Ok(Some(Split::Test)),
        "all" => Ok(None),
        other => Err(CliError::config(format!(
            "unknown split {other:?} (expected train, val, test, or all)"
        ))),
    }
}

pub fn run(args: EvalArgs) -> CliResult<()> {
    let split = split_filter(&args.split)?;
    if args.checkpoint.is_none() && args.scores.is_none() {
        return Err(CliError::config(
            "nothing to evaluate: pass --checkpoint and/or --scores",
        ));
    }
    let mut ctx = RunContext::create("eval", &args.out)?;
    for path in [&args.events, &args.images, &args.prompts, &args.triplets] {
        crate::commands::require_file(path)?;
        ctx.record_input(path)?;
    }

    let store = load_store(&args.events, &args.images, &args.prompts)?;
    let rows: Vec<(usize, TripletRecord)> = jsonl::read_jsonl(&args.triplets)?;
    let triplets: Vec<TripletRecord> = rows
        .into_iter()
        .map(|(_, t)| t)
        .filter(|t| split.is_none_or(|s| t.split == s))
        .collect();
    if triplets.is_empty() {
        return Err(CliError::data(format!(
            "no triplets in split {:?}",
            args.split
        )));
    }

    #[derive(serde::Serialize)]
    struct Echo<'a> {
        split: &'a str,
        scorer_name: &'a str,
        with_checkpoint: bool,
        with_scores_file: bool,
    }
    ctx.write_config_echo(&Echo {
        split: &args.split,
        scorer_name: &args.scorer_name,
        with_checkpoint: args.checkpoint.is_some(),
        with_scores_file: args.scores.is_some(),
    })?;

    let images = UriImageSource;
    let mut reports: Vec<EvalReport> = Vec::new();
    if let Some(path) = &args.checkpoint {
        crate::commands::require_file(path)?;
        ctx.record_input(path)?;
        let (encoder, _) = load_checkpoint(path)?;
        let scorer = eval::EncoderScorer::new(args.scorer_name.clone(), &encoder, &images);
        reports.push(eval::pairwise_accuracy(&scorer, &store, &triplets)?);
    }
    if let Some(path) = &args.scores {
        crate::commands::require_file(path)?;
        ctx.record_input(path)?;
        let precomputed = PrecomputedScorer::load_score_file(path)?;
        for scorer in precomputed.values() {
            reports.push(eval::pairwise_accuracy(
                scorer as &dyn Scorer,
                &store,
                &triplets,
            )?);
        }
    }

    ctx.write_output_json("eval_report.json", &reports)?;
    ctx.write_output("eval_report.csv", eval::reports_to_csv(&reports).as_bytes())?;
    if args.svg {
        let rows: Vec<(String, f64)> = reports
            .iter()
            .map(|r| (r.scorer.clone(), r.accuracy))
            .collect();
        ctx.write_output(
            "eval_report.svg",
            svg::bar_chart("pairwise accuracy", &rows).as_bytes(),
        )?;
    }
    for report in &reports {
        logging::info(format!(
            "eval[{}]: {} accuracy {:.4} over {} triplets ({} ties)",
            args.split, report.scorer, report.accuracy, report.n_triplets, report.tie_count,
        ));
    }
    ctx.finish()
}
