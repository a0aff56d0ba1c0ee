use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};
use social_reward::curation::CurationConfig;
use social_reward::sim::{self, SimConfig};

use crate::errors::CliResult;
use crate::logging;
use crate::runfiles::{load_config_file, RunContext};

#[derive(Args)]
pub struct SimulateArgs {
    /// Output directory.
    #[arg(long, short = 'o')]
    out: PathBuf,
    /// Optional TOML config file (flags override file values).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    prompts: Option<usize>,
    #[arg(long)]
    images_per_prompt: Option<usize>,
    #[arg(long)]
    users: Option<usize>,
    #[arg(long)]
    influencers: Option<usize>,
    #[arg(long)]
    activity_alpha: Option<f64>,
    #[arg(long)]
    appeal_alpha: Option<f64>,
    #[arg(long)]
    mean_views: Option<f64>,
    #[arg(long)]
    horizon_days: Option<u32>,
}

/// TOML schema; unknown keys are rejected.
#[derive(Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct SimulateFileConfig {
    rng_seed: Option<u64>,
    n_prompts: Option<usize>,
    n_images_per_prompt: Option<usize>,
    n_users: Option<usize>,
    n_influencers: Option<usize>,
    user_activity_pareto_alpha: Option<f64>,
    content_appeal_pareto_alpha: Option<f64>,
    mean_views_per_image: Option<f64>,
    horizon_days: Option<u32>,
}

fn resolve(args: &SimulateArgs, file: SimulateFileConfig) -> SimConfig {
    let d = SimConfig::default();
    SimConfig {
        n_prompts: args.prompts.or(file.n_prompts).unwrap_or(d.n_prompts),
        n_images_per_prompt: args
            .images_per_prompt
            .or(file.n_images_per_prompt)
            .unwrap_or(d.n_images_per_prompt),
        n_users: args.users.or(file.n_users).unwrap_or(d.n_users),
        n_influencers: args
            .influencers
            .or(file.n_influencers)
            .unwrap_or(d.n_influencers),
        user_activity_pareto_alpha: args
            .activity_alpha
            .or(file.user_activity_pareto_alpha)
            .unwrap_or(d.user_activity_pareto_alpha),
        content_appeal_pareto_alpha: args
            .appeal_alpha
            .or(file.content_appeal_pareto_alpha)
            .unwrap_or(d.content_appeal_pareto_alpha),
        mean_views_per_image: args
            .mean_views
            .or(file.mean_views_per_image)
            .unwrap_or(d.mean_views_per_image),
        horizon_days: args.horizon_days.or(file.horizon_days).unwrap_or(d.horizon_days),
        rng_seed: args.seed.or(file.rng_seed).unwrap_or(d.rng_seed),
    }
}

pub fn run(args: SimulateArgs) -> CliResult<()> {
    let file: SimulateFileConfig = load_config_file(args.config.as_deref())?;
    let cfg = resolve(&args, file);
    let mut ctx = RunContext::create("simulate", &args.out)?;
    ctx.write_config_echo(&cfg)?;

    let output = sim::simulate(&cfg)?;
    output.save(&ctx.out_dir)?;
    for name in [
        "prompts.jsonl",
        "images.jsonl",
        "events.jsonl",
        "roster.json",
        "ground_truth.jsonl",
    ] {
        ctx.note_output(name);
    }
    let stats = sim::stats(&output.store, &output.roster, &CurationConfig::default())?;
    ctx.write_output_json("sim_stats.json", &stats)?;
    logging::info(format!(
        "simulate: {} events ({} views, {} remixes), bottom-half share {:.1}%, \
         top-decile share {:.1}%, positive fraction {}",
        stats.n_events,
        stats.n_views,
        stats.n_remixes,
        stats.bottom_half_remix_share * 100.0,
        stats.top_decile_remix_share * 100.0,
        stats
            .positive_fraction
            .map(|f| format!("{:.1}%", f * 100.0))
            .unwrap_or_else(|| "n/a".to_string()),
    ));
    ctx.finish()
}
