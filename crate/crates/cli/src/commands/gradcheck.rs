use std::path::PathBuf;

use clap::Args;
use serde::Serialize;
use social_reward::trainer::{self, LossKind};

use crate::errors::{CliError, CliResult};
use crate::logging;
use crate::runfiles::RunContext;

#[derive(Args)]
pub struct GradCheckArgs {
    /// Loss kind or "all".
    #[arg(long, default_value = "all")]
    loss: String,
    /// Number of random seeds per loss.
    #[arg(long, default_value_t = 20)]
    seeds: u64,
    /// Maximum relative error accepted.
    #[arg(long, default_value_t = 1e-4)]
    tolerance: f64,
    #[arg(long, short = 'o')]
    out: PathBuf,
}

#[derive(Serialize)]
struct GradCheckRow {
    loss: String,
    seeds: u64,
    max_relative_error: f64,
    tolerance: f64,
    pass: bool,
}

pub fn run(args: GradCheckArgs) -> CliResult<()> {
    let kinds: Vec<LossKind> = if args.loss == "all" {
        LossKind::ALL.to_vec()
    } else {
        vec![args
            .loss
            .parse()
            .map_err(|e: String| CliError::config(e))?]
    };
    let mut ctx = RunContext::create("grad-check", &args.out)?;
    #[derive(Serialize)]
    struct Echo {
        loss: String,
        seeds: u64,
        tolerance: f64,
    }
    ctx.write_config_echo(&Echo {
        loss: args.loss.clone(),
        seeds: args.seeds,
        tolerance: args.tolerance,
    })?;

    let mut rows = Vec::new();
    let mut all_pass = true;
    for kind in kinds {
        let mut worst = 0.0f64;
        for seed in 0..args.seeds {
            worst = worst.max(trainer::grad_check(kind, seed));
        }
        let pass = worst < args.tolerance;
        all_pass &= pass;
        logging::info(format!(
            "grad-check[{}]: max relative error {worst:.3e} over {} seeds -> {}",
            kind.as_str(),
            args.seeds,
            if pass { "PASS" } else { "FAIL" },
        ));
        rows.push(GradCheckRow {
            loss: kind.as_str().to_string(),
            seeds: args.seeds,
            max_relative_error: worst,
            tolerance: args.tolerance,
            pass,
        });
    }
    ctx.write_output_json("grad_check.json", &rows)?;
    ctx.finish()?;
    if !all_pass {
        return Err(CliError::runtime(
            "analytic gradients exceeded tolerance",
        ));
    }
    Ok(())
}
