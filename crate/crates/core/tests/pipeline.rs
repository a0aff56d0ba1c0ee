//! Library-level integration: the full simulate -> curate -> train -> eval
//! flow through public APIs, including the interfaces consumed by external
//! scorers (score files) and fine-tuners (manifests).

use social_reward::curation::{self, CurationConfig, Split};
use social_reward::encoder::{load_checkpoint, save_checkpoint, ReferenceEncoder};
use social_reward::eval::{self, PrecomputedScorer, ScoreRecord};
use social_reward::finetune::{self, FinetuneConfig, ScoredImage};
use social_reward::jsonl;
use social_reward::pixels::UriImageSource;
use social_reward::sim::{self, SimConfig};
use social_reward::trainer::{self, TrainConfig, TripletDataset};

fn small_sim() -> sim::SimOutput {
    sim::simulate(&SimConfig {
        n_prompts: 120,
        n_images_per_prompt: 20,
        n_users: 500,
        n_influencers: 3,
        mean_views_per_image: 45.0,
        rng_seed: 21,
        ..SimConfig::default()
    })
    .unwrap()
}

#[test]
fn simulated_log_flows_through_training_and_eval() {
    let output = small_sim();
    let cfg = CurationConfig::default();
    let outcome = curation::assemble_triplets(&output.store, &output.roster, &cfg).unwrap();
    assert!(outcome.triplets.len() >= 10, "thin fixture: {} triplets", outcome.triplets.len());

    let dataset = TripletDataset::from_store(&output.store, &outcome.triplets).unwrap();
    assert!(!dataset.train.is_empty());

    let train_cfg = TrainConfig {
        max_steps: 60,
        batch_size: 8,
        eval_every: 20,
        ..TrainConfig::default()
    };
    let images = UriImageSource;
    let encoder = ReferenceEncoder::new(train_cfg.encoder_spec.d, train_cfg.rng_seed);
    let trained = trainer::train(&dataset, &train_cfg, encoder, &images).unwrap();
    assert_eq!(trained.log.len(), 60);

    // Checkpoint round trip feeds the evaluation harness.
    let dir = tempfile::tempdir().unwrap();
    let ckpt = dir.path().join("checkpoint.json");
    save_checkpoint(&trained.encoder, &trained.spec, &ckpt).unwrap();
    let (reloaded, _) = load_checkpoint(&ckpt).unwrap();
    let scorer = eval::EncoderScorer::new("reference", &reloaded, &images);
    let test_triplets: Vec<_> = outcome
        .triplets
        .iter()
        .filter(|t| t.split == Split::Test)
        .cloned()
        .collect();
    let report = eval::pairwise_accuracy(&scorer, &output.store, &test_triplets).unwrap();
    assert_eq!(report.n_triplets, test_triplets.len());
    assert!((0.0..=1.0).contains(&report.accuracy));
}

#[test]
fn score_file_interface_round_trips_through_eval() {
    // The third-party integration path: scores written as scores.jsonl are
    // read back and evaluated without any live model.
    let output = small_sim();
    let cfg = CurationConfig::default();
    let outcome = curation::assemble_triplets(&output.store, &output.roster, &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scores.jsonl");

    // A scorer that always prefers the ground-truth higher-appeal image.
    let appeal: std::collections::BTreeMap<&str, f64> = output
        .ground_truth
        .iter()
        .map(|g| (g.image_id.as_str(), g.appeal))
        .collect();
    let mut rows: Vec<ScoreRecord> = Vec::new();
    for t in &outcome.triplets {
        for image_id in [&t.positive_image_id, &t.negative_image_id] {
            rows.push(ScoreRecord {
                scorer: "appeal-oracle".into(),
                prompt_id: t.prompt_id.clone(),
                image_id: image_id.clone(),
                score: appeal[image_id.as_str()],
            });
        }
    }
    jsonl::write_jsonl(&path, &rows).unwrap();

    let scorers = PrecomputedScorer::load_score_file(&path).unwrap();
    let report =
        eval::pairwise_accuracy(&scorers["appeal-oracle"], &output.store, &outcome.triplets)
            .unwrap();
    // Latent appeal drives remixes, so the oracle should beat chance easily.
    assert!(
        report.accuracy > 0.6,
        "appeal oracle accuracy only {}",
        report.accuracy
    );
}

#[test]
fn manifest_interface_reaches_the_finetune_contract() {
    // best_of_n scores feed select_extremes; the manifest is the external
    // fine-tuner contract.
    let output = small_sim();
    let encoder = ReferenceEncoder::new(64, 3);
    let images = UriImageSource;
    let scorer = eval::EncoderScorer::new("reference", &encoder, &images);

    let mut scored: std::collections::BTreeMap<String, Vec<ScoredImage>> =
        std::collections::BTreeMap::new();
    for prompt in output.store.prompts().take(20) {
        let candidates: Vec<(String, String)> = output
            .store
            .images_of_prompt(&prompt.prompt_id)
            .iter()
            .take(4)
            .map(|id| (id.clone(), output.store.image(id).unwrap().uri.clone()))
            .collect();
        let ranked = eval::best_of_n(&scorer, &prompt.prompt_id, &prompt.text, &candidates)
            .unwrap();
        scored.insert(
            prompt.text.clone(),
            ranked
                .into_iter()
                .map(|r| ScoredImage {
                    uri: r.uri,
                    score: r.score,
                })
                .collect(),
        );
    }
    let cfg = FinetuneConfig::default();
    let (selected, report) = finetune::select_extremes(&scored, &cfg).unwrap();
    assert_eq!(report.n_prompts_selected * 2, selected.len());
    let reg: Vec<(String, String)> = (0..200)
        .map(|k| (format!("reg://{k}"), format!("caption {k}")))
        .collect();
    let manifest = finetune::mix_regularization(selected, &reg, &cfg).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("manifest.jsonl");
    jsonl::write_jsonl(&path, &manifest).unwrap();
    let back: Vec<(usize, finetune::ManifestEntry)> = jsonl::read_jsonl(&path).unwrap();
    assert_eq!(back.len(), manifest.len());
}
