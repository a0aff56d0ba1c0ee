//! Reward-guided fine-tuning dataset assembly.
//!
//! Per prompt, the highest- and lowest-scoring images become the `best` and
//! `worst` entries; worst captions carry the negative token as a suffix, to
//! be used as a negative prompt at generation time. A regularization corpus
//! is mixed in at a configurable fraction to prevent distribution collapse.
//! The manifest is the integration contract for an external fine-tuner.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{self, substream};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct FinetuneConfig {
    /// Token appended (space-separated) to worst-image captions.
    pub negative_token: String,
    /// Fraction of the final manifest drawn from the regularization corpus.
    pub regularization_fraction: f64,
    /// Prompts with fewer scored images are skipped.
    pub min_images_per_prompt: usize,
    pub rng_seed: u64,
    /// Optional extra filter: skip prompts whose best-worst score gap is
    /// below this value.
    pub min_score_gap: Option<f64>,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        Self {
            negative_token: "t@y quality".to_string(),
            regularization_fraction: 0.5,
            min_images_per_prompt: 2,
            rng_seed: 0,
            min_score_gap: None,
        }
    }
}

impl FinetuneConfig {
    pub fn validate(&self) -> Result<(), FinetuneError> {
        if self.negative_token.is_empty() {
            return Err(FinetuneError::InvalidConfig(
                "negative_token must be non-empty".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.regularization_fraction) {
            return Err(FinetuneError::InvalidConfig(format!(
                "regularization_fraction {} outside [0, 1)",
                self.regularization_fraction
            )));
        }
        if self.min_images_per_prompt < 2 {
            return Err(FinetuneError::InvalidConfig(
                "min_images_per_prompt must be >= 2".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum FinetuneError {
    #[error("invalid finetune config: {0}")]
    InvalidConfig(String),
    #[error("regularization corpus holds {available} entries, {needed} needed")]
    InsufficientRegularizationCorpus { needed: usize, available: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ManifestRole {
    Best,
    Worst,
    Regularization,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub uri: String,
    pub caption: String,
    pub role: ManifestRole,
}

/// One scored image of a prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredImage {
    pub uri: String,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipReason {
    TooFewImages,
    ScoreGapBelowMinimum,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SkippedPrompt {
    pub prompt: String,
    pub n_images: usize,
    pub reason: SkipReason,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SelectionReport {
    pub n_prompts_in: usize,
    pub n_prompts_selected: usize,
    pub n_entries: usize,
    pub skipped: Vec<SkippedPrompt>,
}

/// Per prompt, emit the argmax-score image as `best` (caption = prompt) and
/// the argmin-score image as `worst` (caption = prompt + " " + token). Ties
/// resolve to the earliest image in input order.
pub fn select_extremes(
    scored: &BTreeMap<String, Vec<ScoredImage>>,
    cfg: &FinetuneConfig,
) -> Result<(Vec<ManifestEntry>, SelectionReport), FinetuneError> {
    cfg.validate()?;
    let mut entries = Vec::new();
    let mut report = SelectionReport {
        n_prompts_in: scored.len(),
        ..SelectionReport::default()
    };
    for (prompt, images) in scored {
        if images.len() < cfg.min_images_per_prompt {
            report.skipped.push(SkippedPrompt {
                prompt: prompt.clone(),
                n_images: images.len(),
                reason: SkipReason::TooFewImages,
            });
            continue;
        }
        let mut best = 0usize;
        let mut worst = 0usize;
        for (k, image) in images.iter().enumerate() {
            if image.score > images[best].score {
                best = k;
            }
            if image.score < images[worst].score {
                worst = k;
            }
        }
        if let Some(gap) = cfg.min_score_gap {
            if images[best].score - images[worst].score < gap {
                report.skipped.push(SkippedPrompt {
                    prompt: prompt.clone(),
                    n_images: images.len(),
                    reason: SkipReason::ScoreGapBelowMinimum,
                });
                continue;
            }
        }
        entries.push(ManifestEntry {
            uri: images[best].uri.clone(),
            caption: prompt.clone(),
            role: ManifestRole::Best,
        });
        entries.push(ManifestEntry {
            uri: images[worst].uri.clone(),
            caption: format!("{prompt} {}", cfg.negative_token),
            role: ManifestRole::Worst,
        });
        report.n_prompts_selected += 1;
    }
    report.n_entries = entries.len();
    Ok((entries, report))
}

/// Mix in `regularization_fraction` of entries drawn uniformly without
/// replacement from the regularization corpus, then shuffle the combined
/// manifest deterministically. The draw count is
/// `round(fraction * selected / (1 - fraction))`.
pub fn mix_regularization(
    selected: Vec<ManifestEntry>,
    reg_corpus: &[(String, String)],
    cfg: &FinetuneConfig,
) -> Result<Vec<ManifestEntry>, FinetuneError> {
    cfg.validate()?;
    let f = cfg.regularization_fraction;
    let n_reg = (f * selected.len() as f64 / (1.0 - f)).round() as usize;
    if n_reg > reg_corpus.len() {
        return Err(FinetuneError::InsufficientRegularizationCorpus {
            needed: n_reg,
            available: reg_corpus.len(),
        });
    }
    let mut manifest = selected;
    let mut draw_rng = substream(cfg.rng_seed, "regularization_draw");
    for idx in rng::sample_without_replacement(&mut draw_rng, reg_corpus.len(), n_reg) {
        let (uri, caption) = &reg_corpus[idx];
        manifest.push(ManifestEntry {
            uri: uri.clone(),
            caption: caption.clone(),
            role: ManifestRole::Regularization,
        });
    }
    let mut shuffle_rng = substream(cfg.rng_seed, "manifest_shuffle");
    rng::shuffle(&mut shuffle_rng, &mut manifest);
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scored(map: &[(&str, &[f64])]) -> BTreeMap<String, Vec<ScoredImage>> {
        map.iter()
            .map(|(prompt, scores)| {
                (
                    prompt.to_string(),
                    scores
                        .iter()
                        .enumerate()
                        .map(|(k, &score)| ScoredImage {
                            uri: format!("synth://{prompt}-{k}"),
                            score,
                        })
                        .collect(),
                )
            })
            .collect()
    }

    #[test]
    fn picks_argmax_and_argmin() {
        let input = scored(&[("a prompt", &[0.1, 0.9, 0.4])]);
        let (entries, report) = select_extremes(&input, &FinetuneConfig::default()).unwrap();
        assert_eq!(report.n_prompts_selected, 1);
        assert_eq!(entries.len(), 2);
        assert_eq!(entries[0].role, ManifestRole::Best);
        assert_eq!(entries[0].uri, "synth://a prompt-1");
        assert_eq!(entries[0].caption, "a prompt");
        assert_eq!(entries[1].role, ManifestRole::Worst);
        assert_eq!(entries[1].uri, "synth://a prompt-0");
        assert_eq!(entries[1].caption, "a prompt t@y quality");
    }

    #[test]
    fn prompt_below_minimum_is_skipped() {
        let input = scored(&[("lonely", &[0.7]), ("full", &[0.7, 0.1])]);
        let (entries, report) = select_extremes(&input, &FinetuneConfig::default()).unwrap();
        assert_eq!(entries.len(), 2);
        assert_eq!(report.skipped.len(), 1);
        assert_eq!(report.skipped[0].prompt, "lonely");
        assert_eq!(report.skipped[0].reason, SkipReason::TooFewImages);
    }

    #[test]
    fn ties_resolve_to_first_in_input_order() {
        let input = scored(&[("tied", &[0.5, 0.5, 0.5])]);
        let (entries, _) = select_extremes(&input, &FinetuneConfig::default()).unwrap();
        assert_eq!(entries[0].uri, "synth://tied-0");
        assert_eq!(entries[1].uri, "synth://tied-0");
    }

    #[test]
    fn matches_exhaustive_scan_oracle() {
        // 1000 prompts x 4 pseudo-random scores.
        let mut input: BTreeMap<String, Vec<ScoredImage>> = BTreeMap::new();
        for k in 0..1000usize {
            let images: Vec<ScoredImage> = (0..4)
                .map(|i| ScoredImage {
                    uri: format!("synth://p{k:04}-{i}"),
                    score: ((crate::rng::fnv1a64(format!("{k}:{i}").as_bytes()) % 10_000)
                        as f64)
                        / 10_000.0,
                })
                .collect();
            input.insert(format!("p{k:04}"), images);
        }
        let (entries, _) = select_extremes(&input, &FinetuneConfig::default()).unwrap();
        assert_eq!(entries.len(), 2000);
        for (prompt, images) in &input {
            // Full-scan oracle per prompt.
            let best = images
                .iter()
                .max_by(|a, b| a.score.partial_cmp(&b.score).unwrap())
                .unwrap();
            let worst = images
                .iter()
                .min_by(|a, b| a.score.partial_cmp(&b.score).unwrap())
                .unwrap();
            let best_entry = entries
                .iter()
                .find(|e| e.caption == *prompt && e.role == ManifestRole::Best)
                .unwrap();
            let worst_entry = entries
                .iter()
                .find(|e| e.role == ManifestRole::Worst && e.caption.starts_with(prompt.as_str()))
                .unwrap();
            assert_eq!(best_entry.uri, best.uri);
            assert_eq!(worst_entry.uri, worst.uri);
        }
    }

    #[test]
    fn score_gap_threshold_skips_flat_prompts() {
        let input = scored(&[("flat", &[0.5, 0.52]), ("spread", &[0.1, 0.9])]);
        let cfg = FinetuneConfig {
            min_score_gap: Some(0.3),
            ..FinetuneConfig::default()
        };
        let (entries, report) = select_extremes(&input, &cfg).unwrap();
        assert_eq!(entries.len(), 2);
        assert_eq!(report.skipped[0].reason, SkipReason::ScoreGapBelowMinimum);
    }

    fn reg_corpus(n: usize) -> Vec<(String, String)> {
        (0..n)
            .map(|k| (format!("reg://{k}"), format!("regularization caption {k}")))
            .collect()
    }

    #[test]
    fn half_fraction_doubles_the_manifest() {
        let input = scored(&[("a", &[0.1, 0.9]), ("b", &[0.3, 0.7])]);
        let (selected, _) = select_extremes(&input, &FinetuneConfig::default()).unwrap();
        assert_eq!(selected.len(), 4);
        let manifest =
            mix_regularization(selected, &reg_corpus(100), &FinetuneConfig::default()).unwrap();
        assert_eq!(manifest.len(), 8);
        let regs = manifest
            .iter()
            .filter(|e| e.role == ManifestRole::Regularization)
            .count();
        assert_eq!(regs, 4);
    }

    #[test]
    fn zero_fraction_returns_selection_only() {
        let input = scored(&[("a", &[0.1, 0.9])]);
        let cfg = FinetuneConfig {
            regularization_fraction: 0.0,
            ..FinetuneConfig::default()
        };
        let (selected, _) = select_extremes(&input, &cfg).unwrap();
        let manifest = mix_regularization(selected.clone(), &reg_corpus(10), &cfg).unwrap();
        // Same multiset (the shuffle may reorder).
        let mut a: Vec<String> = selected.iter().map(|e| format!("{e:?}")).collect();
        let mut b: Vec<String> = manifest.iter().map(|e| format!("{e:?}")).collect();
        a.sort();
        b.sort();
        assert_eq!(a, b);
    }

    #[test]
    fn mixing_is_deterministic_per_seed() {
        let input = scored(&[("a", &[0.1, 0.9]), ("b", &[0.3, 0.7]), ("c", &[0.2, 0.8])]);
        let cfg = FinetuneConfig::default();
        let (selected, _) = select_extremes(&input, &cfg).unwrap();
        let m1 = mix_regularization(selected.clone(), &reg_corpus(50), &cfg).unwrap();
        let m2 = mix_regularization(selected.clone(), &reg_corpus(50), &cfg).unwrap();
        assert_eq!(m1, m2);
        let other_seed = FinetuneConfig {
            rng_seed: 1,
            ..cfg
        };
        let m3 = mix_regularization(selected, &reg_corpus(50), &other_seed).unwrap();
        assert_ne!(m1, m3);
    }

    #[test]
    fn small_corpus_rejected() {
        let input = scored(&[("a", &[0.1, 0.9]), ("b", &[0.3, 0.7])]);
        let (selected, _) = select_extremes(&input, &FinetuneConfig::default()).unwrap();
        assert!(matches!(
            mix_regularization(selected, &reg_corpus(2), &FinetuneConfig::default()),
            Err(FinetuneError::InsufficientRegularizationCorpus { needed: 4, available: 2 })
        ));
    }

    mod proptests {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            /// Positive affine rescaling of a prompt's scores never changes
            /// the selected pair.
            #[test]
            fn affine_invariance(
                raw in proptest::collection::vec(-100.0f64..100.0, 2..12),
                scale in 0.01f64..50.0,
                offset in -100.0f64..100.0,
            ) {
                let base: BTreeMap<String, Vec<ScoredImage>> = [(
                    "p".to_string(),
                    raw.iter()
                        .enumerate()
                        .map(|(k, &score)| ScoredImage { uri: format!("u{k}"), score })
                        .collect(),
                )]
                .into();
                let warped: BTreeMap<String, Vec<ScoredImage>> = [(
                    "p".to_string(),
                    raw.iter()
                        .enumerate()
                        .map(|(k, &score)| ScoredImage {
                            uri: format!("u{k}"),
                            score: scale * score + offset,
                        })
                        .collect(),
                )]
                .into();
                let cfg = FinetuneConfig::default();
                let (a, _) = select_extremes(&base, &cfg).unwrap();
                let (b, _) = select_extremes(&warped, &cfg).unwrap();
                prop_assert_eq!(a, b);
            }

            /// Worst captions end with exactly one copy of the token.
            #[test]
            fn worst_caption_is_suffixed_once(
                prompts in proptest::collection::vec("[a-z]{2,10}( [a-z]{2,8}){0,3}", 1..6),
            ) {
                let cfg = FinetuneConfig::default();
                let input: BTreeMap<String, Vec<ScoredImage>> = prompts
                    .iter()
                    .enumerate()
                    .map(|(k, p)| {
                        (
                            p.clone(),
                            vec![
                                ScoredImage { uri: format!("a{k}"), score: 0.9 },
                                ScoredImage { uri: format!("b{k}"), score: 0.1 },
                            ],
                        )
                    })
                    .collect();
                let (entries, _) = select_extremes(&input, &cfg).unwrap();
                for e in entries {
                    match e.role {
                        ManifestRole::Worst => {
                            prop_assert!(e.caption.ends_with(" t@y quality"));
                            prop_assert_eq!(e.caption.matches("t@y quality").count(), 1);
                        }
                        _ => prop_assert!(!e.caption.contains("t@y quality")),
                    }
                }
            }
        }
    }
}
