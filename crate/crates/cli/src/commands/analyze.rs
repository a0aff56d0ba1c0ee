use std::path::PathBuf;

use clap::Args;
use serde::Serialize;
use social_reward::analysis::{
    self, AsciiRatioDetector, PromptCorpus, SentenceEmbedder,
};
use social_reward::encoder::{Embedding, ReferenceEncoder, DEFAULT_DIM};
use social_reward::svg;

use crate::errors::{CliError, CliResult};
use crate::logging;
use crate::runfiles::RunContext;

#[derive(Args)]
pub struct AnalyzeArgs {
    /// Repeatable corpus argument: NAME=PATH, a text file with one prompt
    /// per line.
    #[arg(long = "corpus", required = true)]
    corpora: Vec<String>,
    /// Number of clusters to cut at.
    #[arg(long)]
    k: usize,
    /// Per-corpus sample size after preprocessing.
    #[arg(long, default_value_t = 2000)]
    sample_n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Minimum ASCII character ratio for the default language filter.
    #[arg(long, default_value_t = 0.9)]
    min_ascii_ratio: f64,
    /// Skip the (slow) 2-D projection export.
    #[arg(long)]
    skip_projection: bool,
    #[arg(long, short = 'o')]
    out: PathBuf,
    #[arg(long)]
    svg: bool,
}

#[derive(Serialize)]
struct ClusterRow<'a> {
    corpus: &'a str,
    prompt: &'a str,
    cluster_id: usize,
}

#[derive(Serialize)]
struct ProjectionRow<'a> {
    corpus: &'a str,
    prompt: &'a str,
    x: f64,
    y: f64,
}

fn parse_corpus_arg(arg: &str) -> CliResult<(String, PathBuf)> {
    let (name, path) = arg.split_once('=').ok_or_else(|| {
        CliError::config(format!("--corpus expects NAME=PATH, got {arg:?}"))
    })?;
    if name.is_empty() {
        return Err(CliError::config("corpus name must be non-empty"));
    }
    Ok((name.to_string(), PathBuf::from(path)))
}

pub fn run(args: AnalyzeArgs) -> CliResult<()> {
    if args.k == 0 {
        return Err(CliError::config("--k must be at least 1"));
    }
    let mut ctx = RunContext::create("analyze-prompts", &args.out)?;
    let mut corpora: Vec<(String, PathBuf)> = Vec::new();
    for arg in &args.corpora {
        let parsed = parse_corpus_arg(arg)?;
        crate::commands::require_file(&parsed.1)?;
        ctx.record_input(&parsed.1)?;
        corpora.push(parsed);
    }
    #[derive(Serialize)]
    struct Echo<'a> {
        corpora: Vec<&'a str>,
        k: usize,
        sample_n: usize,
        rng_seed: u64,
        min_ascii_ratio: f64,
    }
    ctx.write_config_echo(&Echo {
        corpora: corpora.iter().map(|(n, _)| n.as_str()).collect(),
        k: args.k,
        sample_n: args.sample_n,
        rng_seed: args.seed,
        min_ascii_ratio: args.min_ascii_ratio,
    })?;

    // Preprocess each corpus, embed with the reference text encoder, and
    // cluster the union.
    let detector = AsciiRatioDetector {
        min_ratio: args.min_ascii_ratio,
    };
    let embedder = ReferenceEncoder::new(DEFAULT_DIM, args.seed);
    let mut processed: Vec<PromptCorpus> = Vec::new();
    for (name, path) in &corpora {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
        let prompts: Vec<String> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(str::to_string)
            .collect();
        let corpus = PromptCorpus::new(name.clone(), prompts);
        let prepped = analysis::preprocess(&corpus, args.sample_n, args.seed, &detector)?;
        logging::info(format!(
            "analyze: corpus {} -> {} prompts after preprocessing",
            name,
            prepped.prompts.len()
        ));
        processed.push(prepped);
    }

    let mut all_embeddings: Vec<Embedding> = Vec::new();
    let mut owners: Vec<(usize, usize)> = Vec::new(); // (corpus idx, prompt idx)
    for (c, corpus) in processed.iter().enumerate() {
        for (p, prompt) in corpus.prompts.iter().enumerate() {
            all_embeddings.push(embedder.embed(prompt).map_err(CliError::data)?);
            owners.push((c, p));
        }
    }
    let fit = analysis::cluster(&all_embeddings, args.k)?;

    // clusters.jsonl
    let cluster_rows: Vec<ClusterRow> = owners
        .iter()
        .zip(&fit.assignments)
        .map(|(&(c, p), &cluster_id)| ClusterRow {
            corpus: &processed[c].source_name,
            prompt: &processed[c].prompts[p],
            cluster_id,
        })
        .collect();
    social_reward::jsonl::write_jsonl(&ctx.out_dir.join("clusters.jsonl"), &cluster_rows)?;
    ctx.note_output("clusters.jsonl");

    // Per-corpus cluster distributions.
    let mut distributions: Vec<(String, Vec<f64>)> = Vec::new();
    for (c, corpus) in processed.iter().enumerate() {
        let embeddings: Vec<Embedding> = owners
            .iter()
            .zip(&all_embeddings)
            .filter(|(&(oc, _), _)| oc == c)
            .map(|(_, e)| e.clone())
            .collect();
        let dist = analysis::distribution(&fit.model, &embeddings)?;
        distributions.push((corpus.source_name.clone(), dist));
    }
    let mut dist_csv = String::from("corpus");
    for cluster in 0..args.k {
        dist_csv.push_str(&format!(",c{cluster}"));
    }
    dist_csv.push('\n');
    for (name, dist) in &distributions {
        dist_csv.push_str(name);
        for v in dist {
            dist_csv.push_str(&format!(",{v}"));
        }
        dist_csv.push('\n');
    }
    ctx.write_output("distribution.csv", dist_csv.as_bytes())?;

    // Pairwise KL matrix.
    let mut kl_csv = String::from("p_corpus,q_corpus,kl_nats\n");
    for (p_name, p_dist) in &distributions {
        for (q_name, q_dist) in &distributions {
            if p_name == q_name {
                continue;
            }
            let kl = analysis::kl_divergence(p_dist, q_dist, 1e-9)?;
            kl_csv.push_str(&format!("{p_name},{q_name},{kl}\n"));
            logging::info(format!("analyze: KL({p_name} || {q_name}) = {kl:.4} nats"));
        }
    }
    ctx.write_output("kl_matrix.csv", kl_csv.as_bytes())?;

    // 2-D projection.
    if !args.skip_projection {
        let coords = analysis::project_2d(&all_embeddings, args.seed)?;
        let projection_rows: Vec<ProjectionRow> = owners
            .iter()
            .zip(&coords)
            .map(|(&(c, p), &(x, y))| ProjectionRow {
                corpus: &processed[c].source_name,
                prompt: &processed[c].prompts[p],
                x,
                y,
            })
            .collect();
        let mut tsne_csv = String::from("corpus,prompt,x,y\n");
        for row in &projection_rows {
            let quoted = row.prompt.replace('"', "\"\"");
            tsne_csv.push_str(&format!("{},\"{}\",{},{}\n", row.corpus, quoted, row.x, row.y));
        }
        ctx.write_output("tsne.csv", tsne_csv.as_bytes())?;
    }

    if args.svg {
        // One bar per corpus-cluster cell is unreadable for large k; chart
        // the per-corpus entropy instead plus the KL pairs.
        let rows: Vec<(String, f64)> = distributions
            .iter()
            .map(|(name, dist)| {
                let entropy: f64 = dist
                    .iter()
                    .filter(|p| **p > 0.0)
                    .map(|p| -p * p.ln())
                    .sum();
                (name.clone(), entropy)
            })
            .collect();
        ctx.write_output(
            "distribution.svg",
            svg::bar_chart("cluster-distribution entropy (nats)", &rows).as_bytes(),
        )?;
    }
    ctx.finish()
}
