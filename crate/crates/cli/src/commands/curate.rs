use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};
use social_reward::curation::{self, CurationConfig};
use social_reward::jsonl;

use social_reward::store::{FeedbackStore, RemixCounting};

use crate::commands::load_roster;
use crate::errors::{CliError, CliResult};
use crate::logging;
use crate::runfiles::{load_config_file, RunContext};

#[derive(Args)]
pub struct CurateArgs {
    #[arg(long)]
    events: PathBuf,
    #[arg(long)]
    images: PathBuf,
    #[arg(long)]
    prompts: PathBuf,
    /// Influencer roster JSON ({"user_ids": [...]}); empty roster if omitted.
    #[arg(long)]
    roster: Option<PathBuf>,
    #[arg(long, short = 'o')]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    top_fraction: Option<f64>,
    #[arg(long)]
    view_percentile: Option<f64>,
    #[arg(long)]
    exposure_window_days: Option<f64>,
    #[arg(long)]
    max_negatives: Option<usize>,
    /// train,val,test fractions, e.g. 0.7,0.1,0.2
    #[arg(long)]
    split_fractions: Option<String>,
    /// Count at most one remix per (image, user) pair.
    #[arg(long)]
    distinct_remixers: bool,
}

#[derive(Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct CurateFileConfig {
    rng_seed: Option<u64>,
    positive_top_fraction: Option<f64>,
    view_threshold_percentile: Option<f64>,
    exposure_window_ms: Option<i64>,
    max_negatives_per_positive: Option<usize>,
    split_fractions: Option<(f64, f64, f64)>,
}

fn parse_split_fractions(text: &str) -> CliResult<(f64, f64, f64)> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 3 {
        return Err(CliError::config(format!(
            "--split-fractions expects three comma-separated values, got {text:?}"
        )));
    }
    let mut values = [0.0f64; 3];
    for (slot, part) in values.iter_mut().zip(&parts) {
        *slot = part
            .trim()
            .parse()
            .map_err(|e| CliError::config(format!("bad fraction {part:?}: {e}")))?;
    }
    Ok((values[0], values[1], values[2]))
}

fn resolve(args: &CurateArgs, file: CurateFileConfig) -> CliResult<CurationConfig> {
    let d = CurationConfig::default();
    let split_fractions = match &args.split_fractions {
        Some(text) => parse_split_fractions(text)?,
        None => file.split_fractions.unwrap_or(d.split_fractions),
    };
    let cfg = CurationConfig {
        positive_top_fraction: args
            .top_fraction
            .or(file.positive_top_fraction)
            .unwrap_or(d.positive_top_fraction),
        view_threshold_percentile: args
            .view_percentile
            .or(file.view_threshold_percentile)
            .unwrap_or(d.view_threshold_percentile),
        exposure_window_ms: args
            .exposure_window_days
            .map(|days| (days * 24.0 * 3600.0 * 1000.0) as i64)
            .or(file.exposure_window_ms)
            .unwrap_or(d.exposure_window_ms),
        max_negatives_per_positive: args
            .max_negatives
            .or(file.max_negatives_per_positive)
            .unwrap_or(d.max_negatives_per_positive),
        split_fractions,
        rng_seed: args.seed.or(file.rng_seed).unwrap_or(d.rng_seed),
    };
    cfg.validate().map_err(CliError::config)?;
    Ok(cfg)
}

pub fn run(args: CurateArgs) -> CliResult<()> {
    let file: CurateFileConfig = load_config_file(args.config.as_deref())?;
    let cfg = resolve(&args, file)?;
    let mut ctx = RunContext::create("curate", &args.out)?;
    for path in [&args.events, &args.images, &args.prompts] {
        crate::commands::require_file(path)?;
        ctx.record_input(path)?;
    }
    if let Some(roster) = &args.roster {
        crate::commands::require_file(roster)?;
        ctx.record_input(roster)?;
    }
    ctx.write_config_echo(&cfg)?;

    let counting = if args.distinct_remixers {
        RemixCounting::DistinctUsers
    } else {
        RemixCounting::EveryEvent
    };
    let store =
        FeedbackStore::load_log_with(&args.events, &args.images, &args.prompts, counting)?;
    let roster = load_roster(args.roster.as_ref())?;
    let outcome = curation::assemble_triplets(&store, &roster, &cfg)?;

    jsonl::write_jsonl(&ctx.out_dir.join("triplets.jsonl"), &outcome.triplets)?;
    ctx.note_output("triplets.jsonl");
    ctx.write_output_json("curation_report.json", &outcome.report)?;
    logging::info(format!(
        "curate: {} triplets over {} prompts (train/val/test = {}/{}/{}), \
         view threshold {}, {} prompts dropped",
        outcome.report.n_triplets,
        outcome.report.prompts_per_split.train
            + outcome.report.prompts_per_split.val
            + outcome.report.prompts_per_split.test,
        outcome.report.triplets_per_split.train,
        outcome.report.triplets_per_split.val,
        outcome.report.triplets_per_split.test,
        outcome.report.view_threshold,
        outcome.report.n_dropped_prompts,
    ));
    ctx.finish()
}
