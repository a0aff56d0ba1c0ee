//! Prompt-corpus analysis: preprocessing, Ward clustering over sentence
//! embeddings, cluster-distribution comparison via KL divergence, and 2-D
//! projection export.

pub mod tsne;
pub mod ward;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoder::{DualEncoder, Embedding, EncoderError};
use crate::rng::{self, substream};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("corpus {0:?} is empty after preprocessing")]
    EmptyAfterFilter(String),
    #[error("{needed} points needed, {got} given")]
    TooFewPoints { needed: usize, got: usize },
    #[error("distribution lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("not a probability distribution: {0}")]
    InvalidDistribution(String),
    #[error("cluster count must be >= 1")]
    ZeroClusters,
    #[error(transparent)]
    Encoder(#[from] EncoderError),
}

/// A named list of prompts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptCorpus {
    pub source_name: String,
    pub prompts: Vec<String>,
}

impl PromptCorpus {
    pub fn new(source_name: impl Into<String>, prompts: Vec<String>) -> Self {
        Self {
            source_name: source_name.into(),
            prompts,
        }
    }
}

/// Pluggable language filter.
pub trait LanguageDetector {
    fn is_english(&self, text: &str) -> bool;
}

/// Cheap default: the share of ASCII characters must reach `min_ratio`.
#[derive(Debug, Clone, Copy)]
pub struct AsciiRatioDetector {
    pub min_ratio: f64,
}

impl Default for AsciiRatioDetector {
    fn default() -> Self {
        Self { min_ratio: 0.9 }
    }
}

impl LanguageDetector for AsciiRatioDetector {
    fn is_english(&self, text: &str) -> bool {
        let total = text.chars().count();
        if total == 0 {
            return false;
        }
        let ascii = text.chars().filter(|c| c.is_ascii()).count();
        ascii as f64 / total as f64 >= self.min_ratio
    }
}

/// Text side of any dual encoder doubles as a sentence embedder.
pub trait SentenceEmbedder {
    fn embed(&self, text: &str) -> Result<Embedding, EncoderError>;
}

impl<T: DualEncoder> SentenceEmbedder for T {
    fn embed(&self, text: &str) -> Result<Embedding, EncoderError> {
        self.embed_text(text)
    }
}

/// Deduplicate, drop non-English prompts, truncate to the first five
/// whitespace words, and sample `sample_n` without replacement (everything
/// if fewer remain).
pub fn preprocess(
    corpus: &PromptCorpus,
    sample_n: usize,
    rng_seed: u64,
    detector: &dyn LanguageDetector,
) -> Result<PromptCorpus, AnalysisError> {
    let mut seen = std::collections::BTreeSet::new();
    let mut kept: Vec<String> = Vec::new();
    for prompt in &corpus.prompts {
        if !seen.insert(prompt.clone()) {
            continue;
        }
        if !detector.is_english(prompt) {
            continue;
        }
        let truncated: Vec<&str> = prompt.split_whitespace().take(5).collect();
        if truncated.is_empty() {
            continue;
        }
        kept.push(truncated.join(" "));
    }
    if kept.is_empty() {
        return Err(AnalysisError::EmptyAfterFilter(corpus.source_name.clone()));
    }
    let sampled = if kept.len() > sample_n {
        let mut rng = substream(rng_seed, "prompt_sample");
        let picks = rng::sample_without_replacement(&mut rng, kept.len(), sample_n);
        picks.into_iter().map(|i| kept[i].clone()).collect()
    } else {
        kept
    };
    Ok(PromptCorpus {
        source_name: corpus.source_name.clone(),
        prompts: sampled,
    })
}

/// Fitted flat clustering: `k` centroids in embedding space. New points are
/// assigned to the nearest centroid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterModel {
    pub k: usize,
    pub centroids: Vec<Vec<f64>>,
}

impl ClusterModel {
    /// Index of the nearest centroid (ties go to the lower label).
    pub fn assign(&self, values: &[f64]) -> usize {
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (label, centroid) in self.centroids.iter().enumerate() {
            let d: f64 = centroid
                .iter()
                .zip(values)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            if d < best_d {
                best_d = d;
                best = label;
            }
        }
        best
    }

    pub fn assign_embedding(&self, embedding: &Embedding) -> usize {
        self.assign(embedding.values())
    }
}

#[derive(Debug, Clone)]
pub struct ClusterFit {
    pub model: ClusterModel,
    /// Canonical label of each input point (labels ordered by first member).
    pub assignments: Vec<usize>,
    /// Full merge sequence, exposed for dendrogram-level checks.
    pub merges: Vec<ward::Merge>,
}

/// Ward agglomeration cut at `k` clusters.
pub fn cluster(embeddings: &[Embedding], k: usize) -> Result<ClusterFit, AnalysisError> {
    if k == 0 {
        return Err(AnalysisError::ZeroClusters);
    }
    if embeddings.len() < k {
        return Err(AnalysisError::TooFewPoints {
            needed: k,
            got: embeddings.len(),
        });
    }
    let points: Vec<Vec<f64>> = embeddings.iter().map(|e| e.values().to_vec()).collect();
    let merges = ward::ward_linkage(&points);
    let assignments = ward::cut_to_labels(&merges, points.len(), k);
    let d = points[0].len();
    let mut centroids = vec![vec![0.0; d]; k];
    let mut counts = vec![0usize; k];
    for (point, &label) in points.iter().zip(&assignments) {
        counts[label] += 1;
        for (acc, v) in centroids[label].iter_mut().zip(point) {
            *acc += v;
        }
    }
    for (centroid, count) in centroids.iter_mut().zip(&counts) {
        for v in centroid.iter_mut() {
            *v /= *count as f64;
        }
    }
    Ok(ClusterFit {
        model: ClusterModel { k, centroids },
        assignments,
        merges,
    })
}

/// Normalized histogram of cluster assignments; sums to 1.
pub fn distribution(
    model: &ClusterModel,
    embeddings: &[Embedding],
) -> Result<Vec<f64>, AnalysisError> {
    if embeddings.is_empty() {
        return Err(AnalysisError::TooFewPoints { needed: 1, got: 0 });
    }
    let mut histogram = vec![0.0f64; model.k];
    for e in embeddings {
        histogram[model.assign_embedding(e)] += 1.0;
    }
    let total = embeddings.len() as f64;
    for h in histogram.iter_mut() {
        *h /= total;
    }
    Ok(histogram)
}

/// KL(P || Q) in nats over epsilon-smoothed distributions:
/// each side becomes (v + eps) / (1 + k*eps) first. With eps = 0 an
/// absolutely-discontinuous pair yields +infinity.
pub fn kl_divergence(p: &[f64], q: &[f64], epsilon: f64) -> Result<f64, AnalysisError> {
    if p.len() != q.len() {
        return Err(AnalysisError::LengthMismatch(p.len(), q.len()));
    }
    if p.is_empty() {
        return Err(AnalysisError::InvalidDistribution("empty vector".into()));
    }
    for (name, v) in [("P", p), ("Q", q)] {
        if v.iter().any(|x| *x < 0.0 || !x.is_finite()) {
            return Err(AnalysisError::InvalidDistribution(format!(
                "{name} has a negative or non-finite entry"
            )));
        }
        let sum: f64 = v.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(AnalysisError::InvalidDistribution(format!(
                "{name} sums to {sum}"
            )));
        }
    }
    let k = p.len() as f64;
    let smooth = |v: f64| (v + epsilon) / (1.0 + k * epsilon);
    let mut total = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        let ps = smooth(pi);
        let qs = smooth(qi);
        if ps == 0.0 {
            continue; // 0 * ln 0 = 0
        }
        if qs == 0.0 {
            return Ok(f64::INFINITY);
        }
        total += ps * (ps / qs).ln();
    }
    Ok(total)
}

/// 2-D neighbor-embedding projection with default settings.
pub fn project_2d(
    embeddings: &[Embedding],
    rng_seed: u64,
) -> Result<Vec<(f64, f64)>, AnalysisError> {
    if embeddings.len() < 2 {
        return Err(AnalysisError::TooFewPoints {
            needed: 2,
            got: embeddings.len(),
        });
    }
    let points: Vec<Vec<f64>> = embeddings.iter().map(|e| e.values().to_vec()).collect();
    Ok(tsne::project(
        &points,
        &tsne::TsneConfig {
            seed: rng_seed,
            ..tsne::TsneConfig::default()
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preprocess_truncates_to_five_words() {
        let corpus = PromptCorpus::new(
            "t",
            vec!["a red fox jumps over the lazy dog".to_string()],
        );
        let out = preprocess(&corpus, 100, 0, &AsciiRatioDetector::default()).unwrap();
        assert_eq!(out.prompts, vec!["a red fox jumps over".to_string()]);
    }

    #[test]
    fn preprocess_deduplicates_and_filters_language() {
        let corpus = PromptCorpus::new(
            "t",
            vec![
                "golden crown".to_string(),
                "golden crown".to_string(),
                "日本語のプロンプトです".to_string(),
                "pastel sky".to_string(),
            ],
        );
        let out = preprocess(&corpus, 100, 0, &AsciiRatioDetector::default()).unwrap();
        assert_eq!(
            out.prompts,
            vec!["golden crown".to_string(), "pastel sky".to_string()]
        );
    }

    #[test]
    fn preprocess_sampling_is_deterministic() {
        let prompts: Vec<String> = (0..1000).map(|k| format!("prompt number {k}")).collect();
        let corpus = PromptCorpus::new("t", prompts);
        let a = preprocess(&corpus, 60, 7, &AsciiRatioDetector::default()).unwrap();
        let b = preprocess(&corpus, 60, 7, &AsciiRatioDetector::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.prompts.len(), 60);
        let c = preprocess(&corpus, 60, 8, &AsciiRatioDetector::default()).unwrap();
        assert_ne!(a.prompts, c.prompts);
    }

    #[test]
    fn preprocess_empty_after_filter() {
        let corpus = PromptCorpus::new("t", vec!["日本語".to_string()]);
        assert!(matches!(
            preprocess(&corpus, 10, 0, &AsciiRatioDetector::default()),
            Err(AnalysisError::EmptyAfterFilter(_))
        ));
    }

    fn blob_points(seed: u64, n_each: usize) -> Vec<Embedding> {
        let mut rng = substream(seed, "blobs");
        let mut points = Vec::new();
        // Blob A at (0, 0), blob B at (10, 10): unambiguously separated.
        for k in 0..2 * n_each {
            let center = if k % 2 == 0 { 0.0 } else { 10.0 };
            points.push(Embedding::new(vec![
                center + rng::uniform_in(&mut rng, -0.5, 0.5),
                center + rng::uniform_in(&mut rng, -0.5, 0.5),
            ]));
        }
        points
    }

    #[test]
    fn two_blobs_recovered_exactly() {
        let points = blob_points(5, 20);
        let fit = cluster(&points, 2).unwrap();
        for (k, &label) in fit.assignments.iter().enumerate() {
            // Interleaved construction: even index = blob 0.
            let expected = if k % 2 == 0 { 0 } else { 1 };
            assert_eq!(label, expected, "point {k} misassigned");
        }
        // Nearest-centroid assignment agrees on the training points.
        for (point, &label) in points.iter().zip(&fit.assignments) {
            assert_eq!(fit.model.assign_embedding(point), label);
        }
    }

    #[test]
    fn cluster_rejects_too_few_points() {
        let points = blob_points(1, 2);
        assert!(matches!(
            cluster(&points, 10),
            Err(AnalysisError::TooFewPoints { .. })
        ));
    }

    #[test]
    fn partition_is_input_order_invariant() {
        let points = blob_points(11, 8);
        let fit_a = cluster(&points, 2).unwrap();
        let mut reversed = points.clone();
        reversed.reverse();
        let fit_b = cluster(&reversed, 2).unwrap();
        // Compare partitions as value-sets, ignoring label names.
        let partition = |points: &[Embedding], labels: &[usize]| {
            let mut groups: Vec<Vec<String>> = vec![Vec::new(); 2];
            for (p, &l) in points.iter().zip(labels) {
                groups[l].push(format!("{:?}", p.values()));
            }
            for g in groups.iter_mut() {
                g.sort();
            }
            groups.sort();
            groups
        };
        assert_eq!(
            partition(&points, &fit_a.assignments),
            partition(&reversed, &fit_b.assignments)
        );
    }

    #[test]
    fn distribution_one_hot_and_uniform() {
        let model = ClusterModel {
            k: 4,
            centroids: vec![
                vec![0.0, 0.0],
                vec![10.0, 0.0],
                vec![0.0, 10.0],
                vec![10.0, 10.0],
            ],
        };
        let near_first: Vec<Embedding> = (0..5)
            .map(|k| Embedding::new(vec![0.1 * k as f64, 0.0]))
            .collect();
        let d = distribution(&model, &near_first).unwrap();
        assert_eq!(d, vec![1.0, 0.0, 0.0, 0.0]);

        let balanced: Vec<Embedding> = vec![
            Embedding::new(vec![0.0, 0.1]),
            Embedding::new(vec![10.0, 0.1]),
            Embedding::new(vec![0.1, 10.0]),
            Embedding::new(vec![10.1, 10.0]),
        ];
        let d = distribution(&model, &balanced).unwrap();
        assert_eq!(d, vec![0.25; 4]);
        assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn distribution_recovers_planted_mixture() {
        // 60/40 split over two blobs.
        let mut points = Vec::new();
        let mut rng = substream(3, "mixture");
        for _ in 0..60 {
            points.push(Embedding::new(vec![
                rng::uniform_in(&mut rng, -0.5, 0.5),
                0.0,
            ]));
        }
        for _ in 0..40 {
            points.push(Embedding::new(vec![
                10.0 + rng::uniform_in(&mut rng, -0.5, 0.5),
                0.0,
            ]));
        }
        let fit = cluster(&points, 2).unwrap();
        let d = distribution(&fit.model, &points).unwrap();
        assert!((d[0] - 0.6).abs() < 1e-9);
        assert!((d[1] - 0.4).abs() < 1e-9);
    }

    #[test]
    fn kl_of_identical_distributions_is_zero() {
        let p = vec![0.3, 0.5, 0.2];
        assert_eq!(kl_divergence(&p, &p, 0.0).unwrap(), 0.0);
        assert_eq!(kl_divergence(&p, &p, 1e-9).unwrap(), 0.0);
    }

    #[test]
    fn kl_two_bin_hand_value() {
        // 0.5 ln(0.5/0.9) + 0.5 ln(0.5/0.1) = 0.5 ln(25/9) ~ 0.5108 nats.
        let value = kl_divergence(&[0.5, 0.5], &[0.9, 0.1], 0.0).unwrap();
        assert!((value - 0.5108).abs() < 1e-4);
        let exact = 0.5 * (25.0f64 / 9.0).ln();
        assert!((value - exact).abs() < 1e-12);
    }

    #[test]
    fn kl_smoothing_makes_zero_support_finite() {
        let p = vec![0.5, 0.5, 0.0];
        let q = vec![1.0, 0.0, 0.0];
        assert_eq!(kl_divergence(&p, &q, 0.0).unwrap(), f64::INFINITY);
        let smoothed = kl_divergence(&p, &q, 1e-9).unwrap();
        assert!(smoothed.is_finite() && smoothed > 0.0);
    }

    #[test]
    fn kl_validates_inputs() {
        assert!(matches!(
            kl_divergence(&[0.5, 0.5], &[1.0], 0.0),
            Err(AnalysisError::LengthMismatch(2, 1))
        ));
        assert!(matches!(
            kl_divergence(&[0.9, 0.2], &[0.5, 0.5], 0.0),
            Err(AnalysisError::InvalidDistribution(_))
        ));
    }

    #[test]
    fn projection_cardinality_and_determinism() {
        let points = blob_points(9, 6);
        let a = project_2d(&points, 4).unwrap();
        let b = project_2d(&points, 4).unwrap();
        assert_eq!(a.len(), points.len());
        assert_eq!(a, b);
        assert!(matches!(
            project_2d(&points[..1], 4),
            Err(AnalysisError::TooFewPoints { .. })
        ));
    }

    #[test]
    fn reference_encoder_plugs_in_as_sentence_embedder() {
        let enc = crate::encoder::ReferenceEncoder::new(32, 0);
        let e = SentenceEmbedder::embed(&enc, "golden frame").unwrap();
        assert_eq!(e.dim(), 32);
    }

    mod proptests {
        use super::*;
        use proptest::prelude::*;

        fn arb_distribution(len: usize) -> impl Strategy<Value = Vec<f64>> {
            proptest::collection::vec(0.001f64..1.0, len).prop_map(|raw| {
                let sum: f64 = raw.iter().sum();
                raw.into_iter().map(|v| v / sum).collect()
            })
        }

        proptest! {
            #[test]
            fn kl_nonnegative_on_smoothed_pairs(
                p in arb_distribution(6),
                q in arb_distribution(6),
            ) {
                let v = kl_divergence(&p, &q, 1e-9).unwrap();
                prop_assert!(v >= -1e-12, "KL came out negative: {v}");
            }

            #[test]
            fn distribution_always_sums_to_one(xs in proptest::collection::vec(-5.0f64..5.0, 2..40)) {
                let points: Vec<Embedding> = xs.iter().map(|&x| Embedding::new(vec![x, 0.0])).collect();
                let k = 2.min(points.len());
                let fit = cluster(&points, k).unwrap();
                let d = distribution(&fit.model, &points).unwrap();
                prop_assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
    }
}
