use std::path::PathBuf;

use clap::Args;
use serde::Deserialize;
use social_reward::encoder::load_checkpoint;
use social_reward::eval::{self, EncoderScorer};
use social_reward::jsonl;
use social_reward::pixels::UriImageSource;

use crate::errors::{CliError, CliResult};
use crate::logging;
use crate::runfiles::RunContext;

#[derive(Args)]
pub struct RankArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Prompt text to rank against.
    #[arg(long)]
    prompt: String,
    /// JSONL of candidates: {"image_id", "uri"} per line.
    #[arg(long)]
    images: PathBuf,
    #[arg(long, short = 'o')]
    out: PathBuf,
}

#[derive(Deserialize)]
struct Candidate {
    image_id: String,
    uri: String,
}

pub fn run(args: RankArgs) -> CliResult<()> {
    let mut ctx = RunContext::create("rank", &args.out)?;
    for path in [&args.checkpoint, &args.images] {
        crate::commands::require_file(path)?;
        ctx.record_input(path)?;
    }
    #[derive(serde::Serialize)]
    struct Echo<'a> {
        prompt: &'a str,
    }
    ctx.write_config_echo(&Echo {
        prompt: &args.prompt,
    })?;

    let rows: Vec<(usize, Candidate)> = jsonl::read_jsonl(&args.images)?;
    let candidates: Vec<(String, String)> = rows
        .into_iter()
        .map(|(_, c)| (c.image_id, c.uri))
        .collect();
    if candidates.is_empty() {
        return Err(CliError::data("no candidate images given".to_string()));
    }

    let (encoder, _) = load_checkpoint(&args.checkpoint)?;
    let images = UriImageSource;
    let scorer = EncoderScorer::new("social-reward-reference", &encoder, &images);
    let ranked = eval::best_of_n(&scorer, "cli-prompt", &args.prompt, &candidates)?;

    ctx.write_output_json("ranking.json", &ranked)?;
    ctx.write_output("ranking.csv", eval::ranking_to_csv(&ranked).as_bytes())?;
    logging::info(format!(
        "rank: best of {} is {} (score {:.4})",
        ranked.len(),
        ranked[0].image_id,
        ranked[0].score,
    ));
    ctx.finish()
}
