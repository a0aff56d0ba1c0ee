//! Turns a [`FeedbackStore`] into prompt-conditioned preference triplets.
//!
//! Positives carry either the content signal (top slice of images by remix
//! count) or the creator signal (remixed by a roster influencer). Negatives
//! are zero-remix images of the same prompt with enough views to count as
//! confident rejections, exposure-matched to the positive by creation time.
//! Splits are assigned per prompt so no prompt crosses split boundaries.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{self, substream};
use crate::store::{EventKind, FeedbackStore, ImageRecord, InfluencerRoster};

pub const DEFAULT_EXPOSURE_WINDOW_MS: i64 = 14 * 24 * 3600 * 1000;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct CurationConfig {
    /// Fraction of the remixed-image pool labeled positive by remix count.
    pub positive_top_fraction: f64,
    /// Percentile of views-before-first-remix used as the negative view floor.
    pub view_threshold_percentile: f64,
    /// Negatives must be created within this window of their positive.
    pub exposure_window_ms: i64,
    pub max_negatives_per_positive: usize,
    /// (train, val, test), summing to 1.
    pub split_fractions: (f64, f64, f64),
    pub rng_seed: u64,
}

impl Default for CurationConfig {
    fn default() -> Self {
        Self {
            positive_top_fraction: 0.01,
            view_threshold_percentile: 0.99,
            exposure_window_ms: DEFAULT_EXPOSURE_WINDOW_MS,
            max_negatives_per_positive: 2,
            split_fractions: (0.7, 0.1, 0.2),
            rng_seed: 0,
        }
    }
}

impl CurationConfig {
    pub fn validate(&self) -> Result<(), CurationError> {
        let frac_ok = |f: f64| f > 0.0 && f < 1.0;
        if !frac_ok(self.positive_top_fraction) {
            return Err(CurationError::InvalidConfig(format!(
                "positive_top_fraction {} outside (0, 1)",
                self.positive_top_fraction
            )));
        }
        if !frac_ok(self.view_threshold_percentile) {
            return Err(CurationError::InvalidConfig(format!(
                "view_threshold_percentile {} outside (0, 1)",
                self.view_threshold_percentile
            )));
        }
        if self.exposure_window_ms <= 0 {
            return Err(CurationError::InvalidConfig(
                "exposure_window_ms must be positive".into(),
            ));
        }
        if self.max_negatives_per_positive == 0 {
            return Err(CurationError::InvalidConfig(
                "max_negatives_per_positive must be positive".into(),
            ));
        }
        let (tr, va, te) = self.split_fractions;
        if !(frac_ok(tr) && frac_ok(va) && frac_ok(te)) {
            return Err(CurationError::InvalidConfig(
                "split fractions must each lie in (0, 1)".into(),
            ));
        }
        if (tr + va + te - 1.0).abs() > 1e-9 {
            return Err(CurationError::InvalidConfig(format!(
                "split fractions sum to {}, expected 1",
                tr + va + te
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

/// One (prompt, positive image, negative image) preference unit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripletRecord {
    pub prompt_id: String,
    pub positive_image_id: String,
    pub negative_image_id: String,
    pub split: Split,
}

#[derive(Debug, Error)]
pub enum CurationError {
    #[error("invalid curation config: {0}")]
    InvalidConfig(String),
    #[error("no image in the store has any remix")]
    EmptyRemixPool,
    #[error("{0} prompts yield triplets; at least 3 are required to split")]
    TooFewPrompts(usize),
}

/// Why a prompt with positives produced no triplet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    AllImagesPositive,
    NoZeroRemixImages,
    NoQualifyingNegatives,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DroppedPrompt {
    pub prompt_id: String,
    pub reason: DropReason,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl SplitCounts {
    fn bump(&mut self, split: Split) {
        match split {
            Split::Train => self.train += 1,
            Split::Val => self.val += 1,
            Split::Test => self.test += 1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurationReport {
    pub n_prompts_in: usize,
    pub n_images_in: usize,
    pub n_events_in: usize,
    pub n_positive_images: usize,
    /// Positives over all images in the input store. The top-fraction cohort
    /// is the input store itself, not any wider population.
    pub positive_fraction: f64,
    pub view_threshold: u64,
    pub n_triplets: usize,
    pub triplets_per_split: SplitCounts,
    pub prompts_per_split: SplitCounts,
    pub n_prompts_with_positives: usize,
    pub n_dropped_prompts: usize,
    pub dropped_by_reason: BTreeMap<String, usize>,
    pub dropped_prompts: Vec<DroppedPrompt>,
    /// Which population the top-fraction content signal ranked over.
    pub top_fraction_cohort: String,
}

#[derive(Debug, Clone)]
pub struct CurationOutcome {
    pub triplets: Vec<TripletRecord>,
    pub report: CurationReport,
}

/// Integer-exact ceil(f * n) guarding against float representation drift.
fn ceil_fraction(f: f64, n: usize) -> usize {
    ((f * n as f64) - 1e-9).ceil().max(0.0) as usize
}

/// Label the positive images: the top slice of the remixed pool by remix
/// count (content signal) plus every image remixed by a roster influencer
/// (creator signal).
pub fn label_positives(
    store: &FeedbackStore,
    roster: &InfluencerRoster,
    cfg: &CurationConfig,
) -> Result<BTreeSet<String>, CurationError> {
    cfg.validate()?;
    let mut remixed: Vec<&ImageRecord> = store
        .images()
        .filter(|img| store.image_stats(&img.image_id).unwrap().remix_count > 0)
        .collect();
    if remixed.is_empty() {
        return Err(CurationError::EmptyRemixPool);
    }
    remixed.sort_by(|a, b| {
        let ra = store.image_stats(&a.image_id).unwrap().remix_count;
        let rb = store.image_stats(&b.image_id).unwrap().remix_count;
        rb.cmp(&ra)
            .then(a.created_at_ms.cmp(&b.created_at_ms))
            .then(a.image_id.cmp(&b.image_id))
    });
    let take = ceil_fraction(cfg.positive_top_fraction, remixed.len())
        .clamp(1, remixed.len());
    let mut positives: BTreeSet<String> = remixed[..take]
        .iter()
        .map(|img| img.image_id.clone())
        .collect();
    for ev in store.events() {
        if ev.kind == EventKind::Remix && roster.contains(&ev.user_id) {
            positives.insert(ev.image_id.clone());
        }
    }
    Ok(positives)
}

/// Nearest-rank percentile of views-before-first-remix over remixed images
/// belonging to the prompts of the positives.
pub fn compute_view_threshold(
    store: &FeedbackStore,
    positives: &BTreeSet<String>,
    cfg: &CurationConfig,
) -> Result<u64, CurationError> {
    cfg.validate()?;
    let relevant_prompts: BTreeSet<&str> = positives
        .iter()
        .filter_map(|id| store.image(id))
        .map(|img| img.prompt_id.as_str())
        .collect();
    let mut pool: Vec<u64> = Vec::new();
    for prompt_id in relevant_prompts {
        for image_id in store.images_of_prompt(prompt_id) {
            let stats = store.image_stats(image_id).unwrap();
            if stats.remix_count > 0 {
                pool.push(stats.views_before_first_remix);
            }
        }
    }
    if pool.is_empty() {
        return Err(CurationError::EmptyRemixPool);
    }
    pool.sort_unstable();
    let rank = ceil_fraction(cfg.view_threshold_percentile, pool.len()).clamp(1, pool.len());
    Ok(pool[rank - 1])
}

/// Qualifying negatives for one positive: zero-remix images of the same
/// prompt with total views at or above the threshold, created within the
/// exposure window, nearest creation times first.
pub fn select_negatives(
    store: &FeedbackStore,
    prompt_id: &str,
    positive: &ImageRecord,
    threshold: u64,
    cfg: &CurationConfig,
) -> Vec<String> {
    let mut candidates: Vec<(i64, &str)> = store
        .images_of_prompt(prompt_id)
        .iter()
        .filter_map(|image_id| {
            if image_id == &positive.image_id {
                return None;
            }
            let img = store.image(image_id).unwrap();
            let stats = store.image_stats(image_id).unwrap();
            if stats.remix_count != 0 || stats.view_count < threshold {
                return None;
            }
            let dt = (img.created_at_ms - positive.created_at_ms).abs();
            (dt <= cfg.exposure_window_ms).then_some((dt, image_id.as_str()))
        })
        .collect();
    candidates.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(b.1)));
    candidates.truncate(cfg.max_negatives_per_positive);
    candidates.into_iter().map(|(_, id)| id.to_string()).collect()
}

/// Assign prompt-disjoint splits. Input split values are ignored; every
/// triplet inherits the split drawn for its prompt.
pub fn split_by_prompt(
    triplets: Vec<TripletRecord>,
    cfg: &CurationConfig,
) -> Result<Vec<TripletRecord>, CurationError> {
    cfg.validate()?;
    let mut prompt_ids: Vec<String> = triplets
        .iter()
        .map(|t| t.prompt_id.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let n = prompt_ids.len();
    if n < 3 {
        return Err(CurationError::TooFewPrompts(n));
    }
    let mut rng = substream(cfg.rng_seed, "split");
    rng::shuffle(&mut rng, &mut prompt_ids);

    let (_, f_val, f_test) = cfg.split_fractions;
    // Floor counts for val and test with a minimum of one prompt per split;
    // the remainder goes to train. If extreme fractions leave train empty,
    // the larger of val/test gives prompts back.
    let mut n_val = ((f_val * n as f64 + 1e-9).floor() as usize).max(1);
    let mut n_test = ((f_test * n as f64 + 1e-9).floor() as usize).max(1);
    while n_val + n_test + 1 > n {
        if n_test >= n_val && n_test > 1 {
            n_test -= 1;
        } else if n_val > 1 {
            n_val -= 1;
        } else {
            break;
        }
    }
    let n_train = n - n_val - n_test;

    let mut assignment: BTreeMap<&str, Split> = BTreeMap::new();
    for (i, prompt_id) in prompt_ids.iter().enumerate() {
        let split = if i < n_train {
            Split::Train
        } else if i < n_train + n_val {
            Split::Val
        } else {
            Split::Test
        };
        assignment.insert(prompt_id.as_str(), split);
    }
    Ok(triplets
        .into_iter()
        .map(|mut t| {
            t.split = assignment[t.prompt_id.as_str()];
            t
        })
        .collect())
}

/// Full curation pass: label positives, fix the view threshold, pair each
/// positive with its negatives, drop prompts yielding no pair, and split.
pub fn assemble_triplets(
    store: &FeedbackStore,
    roster: &InfluencerRoster,
    cfg: &CurationConfig,
) -> Result<CurationOutcome, CurationError> {
    cfg.validate()?;
    let positives = label_positives(store, roster, cfg)?;
    let threshold = compute_view_threshold(store, &positives, cfg)?;

    let mut unsplit: Vec<TripletRecord> = Vec::new();
    let mut dropped: Vec<DroppedPrompt> = Vec::new();
    let mut n_prompts_with_positives = 0usize;
    for prompt in store.prompts() {
        let image_ids = store.images_of_prompt(&prompt.prompt_id);
        let prompt_positives: Vec<&ImageRecord> = image_ids
            .iter()
            .filter(|id| positives.contains(*id))
            .map(|id| store.image(id).unwrap())
            .collect();
        if prompt_positives.is_empty() {
            continue;
        }
        n_prompts_with_positives += 1;
        let mut produced = false;
        for positive in &prompt_positives {
            for negative_id in
                select_negatives(store, &prompt.prompt_id, positive, threshold, cfg)
            {
                unsplit.push(TripletRecord {
                    prompt_id: prompt.prompt_id.clone(),
                    positive_image_id: positive.image_id.clone(),
                    negative_image_id: negative_id,
                    split: Split::Train,
                });
                produced = true;
            }
        }
        if !produced {
            let reason = if prompt_positives.len() == image_ids.len() {
                DropReason::AllImagesPositive
            } else if !image_ids.iter().any(|id| {
                store.image_stats(id).unwrap().remix_count == 0
            }) {
                DropReason::NoZeroRemixImages
            } else {
                DropReason::NoQualifyingNegatives
            };
            dropped.push(DroppedPrompt {
                prompt_id: prompt.prompt_id.clone(),
                reason,
            });
        }
    }

    let triplets = split_by_prompt(unsplit, cfg)?;

    let mut triplets_per_split = SplitCounts::default();
    let mut prompt_split: BTreeMap<&str, Split> = BTreeMap::new();
    for t in &triplets {
        triplets_per_split.bump(t.split);
        prompt_split.insert(t.prompt_id.as_str(), t.split);
    }
    let mut prompts_per_split = SplitCounts::default();
    for split in prompt_split.values() {
        prompts_per_split.bump(*split);
    }
    let mut dropped_by_reason: BTreeMap<String, usize> = BTreeMap::new();
    for d in &dropped {
        let key = serde_json::to_value(d.reason)
            .expect("reason serializes")
            .as_str()
            .unwrap()
            .to_string();
        *dropped_by_reason.entry(key).or_default() += 1;
    }
    let report = CurationReport {
        n_prompts_in: store.n_prompts(),
        n_images_in: store.n_images(),
        n_events_in: store.n_events(),
        n_positive_images: positives.len(),
        positive_fraction: positives.len() as f64 / store.n_images().max(1) as f64,
        view_threshold: threshold,
        n_triplets: triplets.len(),
        triplets_per_split,
        prompts_per_split,
        n_prompts_with_positives,
        n_dropped_prompts: dropped.len(),
        dropped_by_reason,
        dropped_prompts: dropped,
        top_fraction_cohort: "remixed images of the input store".to_string(),
    };
    Ok(CurationOutcome { triplets, report })
}
