use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};
use social_reward::curation::TripletRecord;
use social_reward::encoder::{
    load_checkpoint, save_checkpoint, EncoderSpec, EncoderVariant, ReferenceEncoder, DEFAULT_DIM,
    IMAGE_BLOCKS, TEXT_BLOCKS,
};
use social_reward::jsonl;
use social_reward::pixels::UriImageSource;
use social_reward::trainer::{self, LossKind, TrainConfig, TripletDataset};

use crate::commands::load_store;
use crate::errors::{CliError, CliResult};
use crate::logging;
use crate::runfiles::{load_config_file, RunContext};

#[derive(Args)]
pub struct TrainArgs {
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
    #[arg(long)]
    config: Option<PathBuf>,
    /// Resume/fine-tune from an existing checkpoint instead of a fresh init.
    #[arg(long)]
    init_checkpoint: Option<PathBuf>,
    /// triplet | infonce | contrastive | bce | reweighted_ce
    #[arg(long)]
    loss: Option<LossKind>,
    #[arg(long)]
    margin: Option<f64>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    max_steps: Option<usize>,
    #[arg(long)]
    eval_every: Option<usize>,
    #[arg(long)]
    weight_decay: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    text_blocks: Option<usize>,
    #[arg(long)]
    image_blocks: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
}

#[derive(Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct TrainFileConfig {
    loss: Option<LossKind>,
    margin_alpha: Option<f64>,
    temperature: Option<f64>,
    learning_rate: Option<f64>,
    batch_size: Option<usize>,
    max_steps: Option<usize>,
    eval_every: Option<usize>,
    weight_decay: Option<f64>,
    rng_seed: Option<u64>,
    text_trainable_blocks: Option<usize>,
    image_trainable_blocks: Option<usize>,
    d: Option<usize>,
}

fn resolve(args: &TrainArgs, file: TrainFileConfig) -> TrainConfig {
    let d = TrainConfig::default();
    TrainConfig {
        loss: args.loss.or(file.loss).unwrap_or(d.loss),
        margin_alpha: args.margin.or(file.margin_alpha).unwrap_or(d.margin_alpha),
        temperature: args.temperature.or(file.temperature).unwrap_or(d.temperature),
        learning_rate: args.lr.or(file.learning_rate).unwrap_or(d.learning_rate),
        batch_size: args.batch_size.or(file.batch_size).unwrap_or(d.batch_size),
        max_steps: args.max_steps.or(file.max_steps).unwrap_or(d.max_steps),
        rng_seed: args.seed.or(file.rng_seed).unwrap_or(d.rng_seed),
        encoder_spec: EncoderSpec {
            text_trainable_blocks: args
                .text_blocks
                .or(file.text_trainable_blocks)
                .unwrap_or(TEXT_BLOCKS),
            image_trainable_blocks: args
                .image_blocks
                .or(file.image_trainable_blocks)
                .unwrap_or(IMAGE_BLOCKS),
            d: args.dim.or(file.d).unwrap_or(DEFAULT_DIM),
            variant: EncoderVariant::Reference,
        },
        eval_every: args.eval_every.or(file.eval_every).unwrap_or(d.eval_every),
        weight_decay: args
            .weight_decay
            .or(file.weight_decay)
            .unwrap_or(d.weight_decay),
    }
}

#[derive(Serialize)]
struct TrainSummary {
    steps: usize,
    final_train_loss: Option<f64>,
    best_step: Option<usize>,
    best_val_accuracy: Option<f64>,
    n_train: usize,
    n_val: usize,
    n_test: usize,
}

pub fn run(args: TrainArgs) -> CliResult<()> {
    let file: TrainFileConfig = load_config_file(args.config.as_deref())?;
    let cfg = resolve(&args, file);
    cfg.validate().map_err(CliError::config)?;
    let mut ctx = RunContext::create("train", &args.out)?;
    for path in [&args.events, &args.images, &args.prompts, &args.triplets] {
        crate::commands::require_file(path)?;
        ctx.record_input(path)?;
    }
    ctx.write_config_echo(&cfg)?;

    let store = load_store(&args.events, &args.images, &args.prompts)?;
    let triplet_rows: Vec<(usize, TripletRecord)> = jsonl::read_jsonl(&args.triplets)?;
    let triplets: Vec<TripletRecord> = triplet_rows.into_iter().map(|(_, t)| t).collect();
    let dataset = TripletDataset::from_store(&store, &triplets)?;
    logging::info(format!(
        "train: {} train / {} val / {} test triplets, loss {}",
        dataset.train.len(),
        dataset.val.len(),
        dataset.test.len(),
        cfg.loss.as_str(),
    ));

    let encoder = match &args.init_checkpoint {
        Some(path) => {
            crate::commands::require_file(path)?;
            ctx.record_input(path)?;
            let (encoder, _) = load_checkpoint(path)?;
            encoder
        }
        None => ReferenceEncoder::new(cfg.encoder_spec.d, cfg.rng_seed),
    };

    let images = UriImageSource;
    let outcome = trainer::train(&dataset, &cfg, encoder, &images)?;
    for entry in outcome.log.iter().filter(|e| e.val_pairwise_accuracy.is_some()) {
        logging::debug(format!(
            "step {}: loss {:.6}, val accuracy {:.4}",
            entry.step,
            entry.train_loss,
            entry.val_pairwise_accuracy.unwrap()
        ));
    }

    save_checkpoint(&outcome.encoder, &outcome.spec, &ctx.out_dir.join("checkpoint.json"))?;
    ctx.note_output("checkpoint.json");
    jsonl::write_jsonl(&ctx.out_dir.join("train_log.jsonl"), &outcome.log)?;
    ctx.note_output("train_log.jsonl");
    let summary = TrainSummary {
        steps: outcome.log.len(),
        final_train_loss: outcome.log.last().map(|e| e.train_loss),
        best_step: outcome.best_step,
        best_val_accuracy: outcome.best_val_accuracy,
        n_train: dataset.train.len(),
        n_val: dataset.val.len(),
        n_test: dataset.test.len(),
    };
    ctx.write_output_json("train_summary.json", &summary)?;
    logging::info(format!(
        "train: finished {} steps, best val accuracy {:?} at step {:?}",
        summary.steps, summary.best_val_accuracy, summary.best_step,
    ));
    ctx.finish()
}
