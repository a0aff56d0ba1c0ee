//! Pipeline driver for the social-reward toolkit.
//!
//! Every subcommand reads JSONL/TOML inputs, writes its artifacts plus a
//! resolved-config echo and a run manifest into `--out`, and is
//! deterministic for a fixed (config, inputs, seed).

mod commands;
mod errors;
mod logging;
mod runfiles;

use clap::{Parser, Subcommand};

use crate::errors::CliResult;

#[derive(Parser)]
#[command(
    name = "social-reward",
    version,
    about = "Curates implicit-feedback logs into preference triplets, trains and \
             evaluates dual-encoder social-reward scorers, analyzes prompt corpora, \
             and assembles reward-guided fine-tuning datasets."
)]
struct Cli {
    /// quiet | info | debug
    #[arg(long, global = true, default_value = "info")]
    log_level: String,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic engagement log with a power-law population.
    Simulate(commands::simulate::SimulateArgs),
    /// Curate an engagement log into preference triplets with splits.
    Curate(commands::curate::CurateArgs),
    /// Fine-tune the reference dual encoder on curated triplets.
    Train(commands::train::TrainArgs),
    /// Pairwise-accuracy evaluation of one or more scorers.
    Eval(commands::eval::EvalArgs),
    /// Rank candidate images for one prompt by scorer output.
    Rank(commands::rank::RankArgs),
    /// Mean-score and win-rate tables for two generators.
    CompareGenerators(commands::compare::CompareArgs),
    /// Preprocess, cluster, and compare prompt corpora.
    AnalyzePrompts(commands::analyze::AnalyzeArgs),
    /// Select best/worst images per prompt and mix a regularization corpus.
    SelectFinetune(commands::select::SelectArgs),
    /// Validate analytic loss gradients against finite differences.
    GradCheck(commands::gradcheck::GradCheckArgs),
}

fn run(cli: Cli) -> CliResult<()> {
    logging::init(&cli.log_level)?;
    match cli.command {
        Command::Simulate(args) => commands::simulate::run(args),
        Command::Curate(args) => commands::curate::run(args),
        Command::Train(args) => commands::train::run(args),
        Command::Eval(args) => commands::eval::run(args),
        Command::Rank(args) => commands::rank::run(args),
        Command::CompareGenerators(args) => commands::compare::run(args),
        Command::AnalyzePrompts(args) => commands::analyze::run(args),
        Command::SelectFinetune(args) => commands::select::run(args),
        Command::GradCheck(args) => commands::gradcheck::run(args),
    }
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => {}
        Err(err) => {
            eprintln!("error: {err}");
            std::process::exit(err.exit_code());
        }
    }
}
