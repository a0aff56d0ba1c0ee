use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};
use social_reward::finetune::{self, FinetuneConfig, ScoredImage};
use social_reward::jsonl;

use crate::errors::{CliError, CliResult};
use crate::logging;
use crate::runfiles::{load_config_file, RunContext};

#[derive(Args)]
pub struct SelectArgs {
    /// JSONL of scored generations: {"prompt","uri","score"} per line.
    #[arg(long)]
    scored: PathBuf,
    /// JSONL regularization corpus: {"uri","caption"} per line. Required
    /// unless the regularization fraction is zero.
    #[arg(long)]
    reg_corpus: Option<PathBuf>,
    #[arg(long, short = 'o')]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    negative_token: Option<String>,
    #[arg(long)]
    reg_fraction: Option<f64>,
    #[arg(long)]
    min_images: Option<usize>,
    #[arg(long)]
    min_score_gap: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct SelectFileConfig {
    negative_token: Option<String>,
    regularization_fraction: Option<f64>,
    min_images_per_prompt: Option<usize>,
    min_score_gap: Option<f64>,
    rng_seed: Option<u64>,
}

#[derive(Deserialize)]
struct ScoredRow {
    prompt: String,
    uri: String,
    score: f64,
}

#[derive(Deserialize)]
struct RegRow {
    uri: String,
    caption: String,
}

fn resolve(args: &SelectArgs, file: SelectFileConfig) -> FinetuneConfig {
    let d = FinetuneConfig::default();
    FinetuneConfig {
        negative_token: args
            .negative_token
            .clone()
            .or(file.negative_token)
            .unwrap_or(d.negative_token),
        regularization_fraction: args
            .reg_fraction
            .or(file.regularization_fraction)
            .unwrap_or(d.regularization_fraction),
        min_images_per_prompt: args
            .min_images
            .or(file.min_images_per_prompt)
            .unwrap_or(d.min_images_per_prompt),
        rng_seed: args.seed.or(file.rng_seed).unwrap_or(d.rng_seed),
        min_score_gap: args.min_score_gap.or(file.min_score_gap),
    }
}

pub fn run(args: SelectArgs) -> CliResult<()> {
    let file: SelectFileConfig = load_config_file(args.config.as_deref())?;
    let cfg = resolve(&args, file);
    cfg.validate().map_err(CliError::config)?;
    let mut ctx = RunContext::create("select-finetune", &args.out)?;
    crate::commands::require_file(&args.scored)?;
    ctx.record_input(&args.scored)?;
    ctx.write_config_echo(&cfg)?;

    let rows: Vec<(usize, ScoredRow)> = jsonl::read_jsonl(&args.scored)?;
    let mut scored: BTreeMap<String, Vec<ScoredImage>> = BTreeMap::new();
    for (_, row) in rows {
        scored.entry(row.prompt).or_default().push(ScoredImage {
            uri: row.uri,
            score: row.score,
        });
    }
    if scored.is_empty() {
        return Err(CliError::data("scored file holds no rows".to_string()));
    }

    let (selected, report) = finetune::select_extremes(&scored, &cfg)?;

    let reg_corpus: Vec<(String, String)> = match &args.reg_corpus {
        Some(path) => {
            crate::commands::require_file(path)?;
            ctx.record_input(path)?;
            let rows: Vec<(usize, RegRow)> = jsonl::read_jsonl(path)?;
            rows.into_iter().map(|(_, r)| (r.uri, r.caption)).collect()
        }
        None if cfg.regularization_fraction == 0.0 => Vec::new(),
        None => {
            return Err(CliError::config(
                "--reg-corpus is required when the regularization fraction is nonzero",
            ))
        }
    };
    let manifest = finetune::mix_regularization(selected, &reg_corpus, &cfg)?;

    jsonl::write_jsonl(&ctx.out_dir.join("manifest.jsonl"), &manifest)?;
    ctx.note_output("manifest.jsonl");
    ctx.write_output_json("selection_report.json", &report)?;
    logging::info(format!(
        "select-finetune: {} manifest entries from {} prompts ({} skipped)",
        manifest.len(),
        report.n_prompts_selected,
        report.skipped.len(),
    ));
    ctx.finish()
}
