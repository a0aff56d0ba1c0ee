//! Scorer-agnostic evaluation: pairwise accuracy over triplets, best-of-n
//! ranking, generator comparisons, and cross-dataset accuracy tables.
//!
//! Anything that maps a (prompt, image) pair to a finite real number can be
//! evaluated — a live encoder or a precomputed score file. Ties count 0.5
//! toward pairwise accuracy and are reported separately so stricter
//! variants stay recoverable.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curation::TripletRecord;
use crate::encoder::{DualEncoder, EncoderError};
use crate::jsonl::{self, JsonlError};
use crate::pixels::{ImageSource, PixelError};
use crate::store::FeedbackStore;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("scorer {scorer:?} cannot score {} pair(s), first: {first:?}", pairs.len())]
    UnscorablePair {
        scorer: String,
        /// (prompt_id, image_id) pairs that failed.
        pairs: Vec<(String, String)>,
        first: (String, String),
    },
    #[error("generation sets disagree at prompt {prompt_id:?}: {reason}")]
    PromptMismatch { prompt_id: String, reason: String },
    #[error("{0} is empty")]
    EmptyInput(&'static str),
    #[error("triplet references missing {what} {id:?}")]
    MissingRecord { what: &'static str, id: String },
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Pixel(#[from] PixelError),
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
}

/// Everything a scorer may need to score one (prompt, image) pair.
#[derive(Debug, Clone, Copy)]
pub struct ScoreRequest<'a> {
    pub prompt_id: &'a str,
    pub prompt_text: &'a str,
    pub image_id: &'a str,
    pub image_uri: &'a str,
}

pub trait Scorer {
    fn name(&self) -> &str;
    fn score(&self, request: &ScoreRequest<'_>) -> Result<f64, EvalError>;
}

/// Scores with a live dual encoder over pixel data.
pub struct EncoderScorer<'a> {
    name: String,
    encoder: &'a dyn DualEncoder,
    images: &'a dyn ImageSource,
}

impl<'a> EncoderScorer<'a> {
    pub fn new(
        name: impl Into<String>,
        encoder: &'a dyn DualEncoder,
        images: &'a dyn ImageSource,
    ) -> Self {
        Self {
            name: name.into(),
            encoder,
            images,
        }
    }
}

impl Scorer for EncoderScorer<'_> {
    fn name(&self) -> &str {
        &self.name
    }

    fn score(&self, request: &ScoreRequest<'_>) -> Result<f64, EvalError> {
        let image = self.images.image(request.image_id, request.image_uri)?;
        Ok(self.encoder.score(request.prompt_text, &image)?)
    }
}

/// One line of a `scores.jsonl` file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub scorer: String,
    pub prompt_id: String,
    pub image_id: String,
    pub score: f64,
}

/// Scores looked up from a precomputed (prompt_id, image_id) table, the
/// integration path for third-party scoring models.
#[derive(Debug, Clone, Default)]
pub struct PrecomputedScorer {
    name: String,
    scores: BTreeMap<(String, String), f64>,
}

impl PrecomputedScorer {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            scores: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, prompt_id: impl Into<String>, image_id: impl Into<String>, score: f64) {
        self.scores.insert((prompt_id.into(), image_id.into()), score);
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Load every scorer found in a scores.jsonl file, keyed by name.
    pub fn load_score_file(path: &Path) -> Result<BTreeMap<String, PrecomputedScorer>, EvalError> {
        let rows: Vec<(usize, ScoreRecord)> = jsonl::read_jsonl(path)?;
        let mut by_name: BTreeMap<String, PrecomputedScorer> = BTreeMap::new();
        for (_, row) in rows {
            by_name
                .entry(row.scorer.clone())
                .or_insert_with(|| PrecomputedScorer::new(row.scorer.clone()))
                .insert(row.prompt_id, row.image_id, row.score);
        }
        Ok(by_name)
    }
}

impl Scorer for PrecomputedScorer {
    fn name(&self) -> &str {
        &self.name
    }

    fn score(&self, request: &ScoreRequest<'_>) -> Result<f64, EvalError> {
        let key = (
            request.prompt_id.to_string(),
            request.image_id.to_string(),
        );
        match self.scores.get(&key) {
            Some(s) if s.is_finite() => Ok(*s),
            _ => Err(EvalError::UnscorablePair {
                scorer: self.name.clone(),
                pairs: vec![key.clone()],
                first: key,
            }),
        }
    }
}

/// Pairwise accuracy of one scorer over a triplet set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub scorer: String,
    pub accuracy: f64,
    pub n_triplets: usize,
    pub wins: usize,
    pub tie_count: usize,
    /// Weight a tie contributes to accuracy (configuration echo).
    pub tie_weight: f64,
    /// Tie-handling note; third-party published numbers may use a
    /// different rule, which is unknown.
    pub note: String,
}

const TIE_NOTE: &str =
    "ties (exactly equal scores) count 0.5; strict accuracy = wins / n_triplets";

struct ResolvedTriplet<'a> {
    prompt_id: &'a str,
    prompt_text: &'a str,
    positive_id: &'a str,
    positive_uri: &'a str,
    negative_id: &'a str,
    negative_uri: &'a str,
}

fn resolve<'a>(
    store: &'a FeedbackStore,
    triplets: &'a [TripletRecord],
) -> Result<Vec<ResolvedTriplet<'a>>, EvalError> {
    triplets
        .iter()
        .map(|t| {
            let prompt = store.prompt(&t.prompt_id).ok_or(EvalError::MissingRecord {
                what: "prompt",
                id: t.prompt_id.clone(),
            })?;
            let pos = store
                .image(&t.positive_image_id)
                .ok_or(EvalError::MissingRecord {
                    what: "image",
                    id: t.positive_image_id.clone(),
                })?;
            let neg = store
                .image(&t.negative_image_id)
                .ok_or(EvalError::MissingRecord {
                    what: "image",
                    id: t.negative_image_id.clone(),
                })?;
            Ok(ResolvedTriplet {
                prompt_id: &t.prompt_id,
                prompt_text: &prompt.text,
                positive_id: &pos.image_id,
                positive_uri: &pos.uri,
                negative_id: &neg.image_id,
                negative_uri: &neg.uri,
            })
        })
        .collect()
}

/// accuracy = (#{s(a,p) > s(a,n)} + 0.5 * #ties) / n. Pairs that cannot be
/// scored are collected and reported together.
pub fn pairwise_accuracy(
    scorer: &dyn Scorer,
    store: &FeedbackStore,
    triplets: &[TripletRecord],
) -> Result<EvalReport, EvalError> {
    if triplets.is_empty() {
        return Err(EvalError::EmptyInput("triplet set"));
    }
    let resolved = resolve(store, triplets)?;
    let mut wins = 0usize;
    let mut ties = 0usize;
    let mut unscorable: Vec<(String, String)> = Vec::new();
    for t in &resolved {
        let pos_req = ScoreRequest {
            prompt_id: t.prompt_id,
            prompt_text: t.prompt_text,
            image_id: t.positive_id,
            image_uri: t.positive_uri,
        };
        let neg_req = ScoreRequest {
            image_id: t.negative_id,
            image_uri: t.negative_uri,
            ..pos_req
        };
        let mut fetch = |req: &ScoreRequest<'_>| -> Option<f64> {
            match scorer.score(req) {
                Ok(s) if s.is_finite() => Some(s),
                _ => {
                    unscorable.push((req.prompt_id.to_string(), req.image_id.to_string()));
                    None
                }
            }
        };
        let (s_p, s_n) = (fetch(&pos_req), fetch(&neg_req));
        if let (Some(s_p), Some(s_n)) = (s_p, s_n) {
            if s_p > s_n {
                wins += 1;
            } else if s_p == s_n {
                ties += 1;
            }
        }
    }
    if !unscorable.is_empty() {
        let first = unscorable[0].clone();
        return Err(EvalError::UnscorablePair {
            scorer: scorer.name().to_string(),
            pairs: unscorable,
            first,
        });
    }
    Ok(EvalReport {
        scorer: scorer.name().to_string(),
        accuracy: (wins as f64 + 0.5 * ties as f64) / triplets.len() as f64,
        n_triplets: triplets.len(),
        wins,
        tie_count: ties,
        tie_weight: 0.5,
        note: TIE_NOTE.to_string(),
    })
}

/// Per-scorer accuracy table over one triplet set.
pub fn compare_scorers(
    scorers: &[&dyn Scorer],
    store: &FeedbackStore,
    triplets: &[TripletRecord],
) -> Result<Vec<EvalReport>, EvalError> {
    scorers
        .iter()
        .map(|s| pairwise_accuracy(*s, store, triplets))
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankedImage {
    pub rank: usize,
    pub image_id: String,
    pub uri: String,
    pub score: f64,
}

/// Sort images by score descending; equal scores keep input order.
pub fn best_of_n(
    scorer: &dyn Scorer,
    prompt_id: &str,
    prompt_text: &str,
    images: &[(String, String)],
) -> Result<Vec<RankedImage>, EvalError> {
    if images.is_empty() {
        return Err(EvalError::EmptyInput("image list"));
    }
    let mut scored: Vec<RankedImage> = Vec::with_capacity(images.len());
    for (image_id, uri) in images {
        let score = scorer.score(&ScoreRequest {
            prompt_id,
            prompt_text,
            image_id,
            image_uri: uri,
        })?;
        scored.push(RankedImage {
            rank: 0,
            image_id: image_id.clone(),
            uri: uri.clone(),
            score,
        });
    }
    // Stable sort: ties stay in input order.
    scored.sort_by(|a, b| b.score.partial_cmp(&a.score).unwrap());
    for (i, r) in scored.iter_mut().enumerate() {
        r.rank = i + 1;
    }
    Ok(scored)
}

/// Generations of two models over a shared prompt list.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PromptGenerations {
    pub prompt_id: String,
    pub prompt_text: String,
    /// (image_id, uri) per generated image.
    pub model_a_images: Vec<(String, String)>,
    pub model_b_images: Vec<(String, String)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenerationBatch {
    pub model_a: String,
    pub model_b: String,
    pub prompts: Vec<PromptGenerations>,
}

/// How a model's images of one prompt collapse to a single score for the
/// win-rate comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PromptAggregation {
    /// Mean score over the k generated images.
    #[default]
    Mean,
    /// Best (maximum) score over the k generated images.
    BestOf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeanScoreRow {
    pub scorer: String,
    pub model_a_mean: f64,
    pub model_b_mean: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WinRateRow {
    pub scorer: String,
    /// Prompts where model B's per-prompt mean strictly beats model A's.
    pub wins: usize,
    pub n_prompts: usize,
    pub win_rate: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneratorComparison {
    pub model_a: String,
    pub model_b: String,
    pub aggregation: PromptAggregation,
    pub mean_scores: Vec<MeanScoreRow>,
    pub win_rates: Vec<WinRateRow>,
}

/// Mean-score and win-rate tables for model B against model A. `aggregation`
/// controls how a prompt's k images collapse for the win decision; the mean
/// table always reports plain means.
pub fn compare_generators(
    scorers: &[&dyn Scorer],
    batch: &GenerationBatch,
    aggregation: PromptAggregation,
) -> Result<GeneratorComparison, EvalError> {
    if batch.prompts.is_empty() {
        return Err(EvalError::EmptyInput("generation batch"));
    }
    for p in &batch.prompts {
        if p.model_a_images.is_empty() || p.model_b_images.is_empty() {
            return Err(EvalError::PromptMismatch {
                prompt_id: p.prompt_id.clone(),
                reason: "a model has no images for this prompt".into(),
            });
        }
        if p.model_a_images.len() != p.model_b_images.len() {
            return Err(EvalError::PromptMismatch {
                prompt_id: p.prompt_id.clone(),
                reason: format!(
                    "image counts differ: {} vs {}",
                    p.model_a_images.len(),
                    p.model_b_images.len()
                ),
            });
        }
    }
    let mut mean_scores = Vec::with_capacity(scorers.len());
    let mut win_rates = Vec::with_capacity(scorers.len());
    for scorer in scorers {
        let mut sum_a = 0.0;
        let mut sum_b = 0.0;
        let mut count_a = 0usize;
        let mut count_b = 0usize;
        let mut wins = 0usize;
        for p in &batch.prompts {
            let prompt_scores = |images: &[(String, String)]| -> Result<Vec<f64>, EvalError> {
                images
                    .iter()
                    .map(|(image_id, uri)| {
                        scorer.score(&ScoreRequest {
                            prompt_id: &p.prompt_id,
                            prompt_text: &p.prompt_text,
                            image_id,
                            image_uri: uri,
                        })
                    })
                    .collect()
            };
            let scores_a = prompt_scores(&p.model_a_images)?;
            let scores_b = prompt_scores(&p.model_b_images)?;
            let collapse = |scores: &[f64]| match aggregation {
                PromptAggregation::Mean => scores.iter().sum::<f64>() / scores.len() as f64,
                PromptAggregation::BestOf => {
                    scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                }
            };
            sum_a += scores_a.iter().sum::<f64>();
            sum_b += scores_b.iter().sum::<f64>();
            count_a += scores_a.len();
            count_b += scores_b.len();
            if collapse(&scores_b) > collapse(&scores_a) {
                wins += 1;
            }
        }
        mean_scores.push(MeanScoreRow {
            scorer: scorer.name().to_string(),
            model_a_mean: sum_a / count_a as f64,
            model_b_mean: sum_b / count_b as f64,
        });
        win_rates.push(WinRateRow {
            scorer: scorer.name().to_string(),
            wins,
            n_prompts: batch.prompts.len(),
            win_rate: wins as f64 / batch.prompts.len() as f64,
        });
    }
    Ok(GeneratorComparison {
        model_a: batch.model_a.clone(),
        model_b: batch.model_b.clone(),
        aggregation,
        mean_scores,
        win_rates,
    })
}

/// One named evaluation dataset.
pub struct EvalDataset<'a> {
    pub name: String,
    pub store: &'a FeedbackStore,
    pub triplets: &'a [TripletRecord],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetAccuracyCell {
    pub dataset: String,
    pub scorer: String,
    pub accuracy: f64,
    pub n_triplets: usize,
    pub tie_count: usize,
}

/// Per-(dataset, scorer) pairwise accuracy table — the shape used to compare
/// generic aesthetic/alignment scorers across preference datasets.
pub fn cross_dataset_report(
    scorers: &[&dyn Scorer],
    datasets: &[EvalDataset<'_>],
) -> Result<Vec<DatasetAccuracyCell>, EvalError> {
    if datasets.is_empty() {
        return Err(EvalError::EmptyInput("dataset list"));
    }
    let mut cells = Vec::with_capacity(datasets.len() * scorers.len());
    for ds in datasets {
        for scorer in scorers {
            let report = pairwise_accuracy(*scorer, ds.store, ds.triplets)?;
            cells.push(DatasetAccuracyCell {
                dataset: ds.name.clone(),
                scorer: report.scorer,
                accuracy: report.accuracy,
                n_triplets: report.n_triplets,
                tie_count: report.tie_count,
            });
        }
    }
    Ok(cells)
}

// ---------------------------------------------------------------------------
// CSV emission
// ---------------------------------------------------------------------------

fn csv_escape(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

pub fn reports_to_csv(reports: &[EvalReport]) -> String {
    let mut out = String::from("scorer,accuracy,n_triplets,wins,tie_count\n");
    for r in reports {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            csv_escape(&r.scorer),
            r.accuracy,
            r.n_triplets,
            r.wins,
            r.tie_count
        ));
    }
    out
}

pub fn comparison_to_csv(cmp: &GeneratorComparison) -> (String, String) {
    let mut means = String::from("scorer,model_a,model_b,model_a_mean,model_b_mean\n");
    for row in &cmp.mean_scores {
        means.push_str(&format!(
            "{},{},{},{},{}\n",
            csv_escape(&row.scorer),
            csv_escape(&cmp.model_a),
            csv_escape(&cmp.model_b),
            row.model_a_mean,
            row.model_b_mean
        ));
    }
    let mut wins = String::from("scorer,wins,n_prompts,win_rate\n");
    for row in &cmp.win_rates {
        wins.push_str(&format!(
            "{},{},{},{}\n",
            csv_escape(&row.scorer),
            row.wins,
            row.n_prompts,
            row.win_rate
        ));
    }
    (means, wins)
}

pub fn cross_report_to_csv(cells: &[DatasetAccuracyCell]) -> String {
    let mut out = String::from("dataset,scorer,accuracy,n_triplets,tie_count\n");
    for c in cells {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            csv_escape(&c.dataset),
            csv_escape(&c.scorer),
            c.accuracy,
            c.n_triplets,
            c.tie_count
        ));
    }
    out
}

pub fn ranking_to_csv(ranked: &[RankedImage]) -> String {
    let mut out = String::from("rank,image_id,uri,score\n");
    for r in ranked {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.rank,
            csv_escape(&r.image_id),
            csv_escape(&r.uri),
            r.score
        ));
    }
    out
}
