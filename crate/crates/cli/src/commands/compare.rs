use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::Args;
use serde::Deserialize;
use social_reward::encoder::load_checkpoint;
use social_reward::eval::{
    self, EncoderScorer, GenerationBatch, PrecomputedScorer, PromptAggregation,
    PromptGenerations, Scorer,
};
use social_reward::jsonl;
use social_reward::pixels::UriImageSource;
use social_reward::svg;

use crate::errors::{CliError, CliResult};
use crate::logging;
use crate::runfiles::RunContext;

#[derive(Args)]
pub struct CompareArgs {
    /// JSONL of generations:
    /// {"prompt_id","prompt_text","model","image_id","uri"} per line.
    #[arg(long)]
    generations: PathBuf,
    #[arg(long)]
    model_a: String,
    #[arg(long)]
    model_b: String,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long, default_value = "social-reward-reference")]
    scorer_name: String,
    #[arg(long)]
    scores: Option<PathBuf>,
    #[arg(long, short = 'o')]
    out: PathBuf,
    /// mean | best_of: how a prompt's images collapse for the win decision.
    #[arg(long, default_value = "mean")]
    aggregation: String,
    #[arg(long)]
    svg: bool,
}

#[derive(Deserialize)]
struct GenerationRow {
    prompt_id: String,
    prompt_text: String,
    model: String,
    image_id: String,
    uri: String,
}

/// (prompt text, model A images, model B images) keyed by prompt id.
type GroupedGenerations = BTreeMap<String, (String, Vec<(String, String)>, Vec<(String, String)>)>;

fn build_batch(
    rows: Vec<GenerationRow>,
    model_a: &str,
    model_b: &str,
) -> CliResult<GenerationBatch> {
    let mut by_prompt: GroupedGenerations = BTreeMap::new();
    for row in rows {
        let entry = by_prompt
            .entry(row.prompt_id.clone())
            .or_insert_with(|| (row.prompt_text.clone(), Vec::new(), Vec::new()));
        if row.model == model_a {
            entry.1.push((row.image_id, row.uri));
        } else if row.model == model_b {
            entry.2.push((row.image_id, row.uri));
        } else {
            return Err(CliError::data(format!(
                "generation row for unknown model {:?} (expected {:?} or {:?})",
                row.model, model_a, model_b
            )));
        }
    }
    let prompts: Vec<PromptGenerations> = by_prompt
        .into_iter()
        .map(|(prompt_id, (prompt_text, a, b))| PromptGenerations {
            prompt_id,
            prompt_text,
            model_a_images: a,
            model_b_images: b,
        })
        .collect();
    Ok(GenerationBatch {
        model_a: model_a.to_string(),
        model_b: model_b.to_string(),
        prompts,
    })
}

pub fn run(args: CompareArgs) -> CliResult<()> {
    if args.checkpoint.is_none() && args.scores.is_none() {
        return Err(CliError::config(
            "no scorers: pass --checkpoint and/or --scores",
        ));
    }
    let mut ctx = RunContext::create("compare-generators", &args.out)?;
    crate::commands::require_file(&args.generations)?;
    ctx.record_input(&args.generations)?;

    let aggregation = match args.aggregation.as_str() {
        "mean" => PromptAggregation::Mean,
        "best_of" => PromptAggregation::BestOf,
        other => {
            return Err(CliError::config(format!(
                "unknown aggregation {other:?} (expected mean or best_of)"
            )))
        }
    };
    #[derive(serde::Serialize)]
    struct Echo<'a> {
        model_a: &'a str,
        model_b: &'a str,
        scorer_name: &'a str,
        aggregation: &'a str,
    }
    ctx.write_config_echo(&Echo {
        model_a: &args.model_a,
        model_b: &args.model_b,
        scorer_name: &args.scorer_name,
        aggregation: &args.aggregation,
    })?;

    let rows: Vec<(usize, GenerationRow)> = jsonl::read_jsonl(&args.generations)?;
    let batch = build_batch(
        rows.into_iter().map(|(_, r)| r).collect(),
        &args.model_a,
        &args.model_b,
    )?;

    let images = UriImageSource;
    let mut checkpoint_encoder = None;
    if let Some(path) = &args.checkpoint {
        crate::commands::require_file(path)?;
        ctx.record_input(path)?;
        checkpoint_encoder = Some(load_checkpoint(path)?.0);
    }
    let encoder_scorer = checkpoint_encoder
        .as_ref()
        .map(|enc| EncoderScorer::new(args.scorer_name.clone(), enc, &images));
    let mut precomputed = BTreeMap::new();
    if let Some(path) = &args.scores {
        crate::commands::require_file(path)?;
        ctx.record_input(path)?;
        precomputed = PrecomputedScorer::load_score_file(path)?;
    }
    let mut scorers: Vec<&dyn Scorer> = Vec::new();
    if let Some(s) = &encoder_scorer {
        scorers.push(s);
    }
    for s in precomputed.values() {
        scorers.push(s);
    }

    let comparison = eval::compare_generators(&scorers, &batch, aggregation)?;
    ctx.write_output_json("comparison.json", &comparison)?;
    let (means_csv, wins_csv) = eval::comparison_to_csv(&comparison);
    ctx.write_output("mean_scores.csv", means_csv.as_bytes())?;
    ctx.write_output("win_rates.csv", wins_csv.as_bytes())?;
    if args.svg {
        let rows: Vec<(String, f64)> = comparison
            .win_rates
            .iter()
            .map(|w| (w.scorer.clone(), w.win_rate))
            .collect();
        ctx.write_output(
            "win_rates.svg",
            svg::bar_chart(
                &format!("win rate of {} vs {}", args.model_b, args.model_a),
                &rows,
            )
            .as_bytes(),
        )?;
    }
    for row in &comparison.win_rates {
        logging::info(format!(
            "compare[{}]: win rate {:.3} ({} of {} prompts)",
            row.scorer, row.win_rate, row.wins, row.n_prompts,
        ));
    }
    ctx.finish()
}
