//! Loss functions and the fine-tuning loop for the dual encoder.
//!
//! Five ranking losses over (anchor, positive, negative) embeddings, each
//! with an analytic gradient validated against central finite differences.
//! Embeddings are L2-normalized before every loss, so squared euclidean
//! distance and cosine similarity rank identically. Training is plain
//! mini-batch AdamW over the configured trainable blocks, bit-deterministic per
//! seed on a single worker.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curation::TripletRecord;
use crate::encoder::nn::{normalize, normalize_backward};
use crate::encoder::{
    DualEncoder, Embedding, EncoderError, EncoderPath, EncoderSpec, PathForward, ReferenceEncoder,
};
use crate::pixels::{ImageSource, PixelError};
use crate::rng::{self, substream};
use crate::store::FeedbackStore;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Triplet,
    Infonce,
    Contrastive,
    Bce,
    ReweightedCe,
}

impl LossKind {
    pub const ALL: [LossKind; 5] = [
        LossKind::Triplet,
        LossKind::Infonce,
        LossKind::Contrastive,
        LossKind::Bce,
        LossKind::ReweightedCe,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            LossKind::Triplet => "triplet",
            LossKind::Infonce => "infonce",
            LossKind::Contrastive => "contrastive",
            LossKind::Bce => "bce",
            LossKind::ReweightedCe => "reweighted_ce",
        }
    }
}

impl std::str::FromStr for LossKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "triplet" => Ok(LossKind::Triplet),
            "infonce" => Ok(LossKind::Infonce),
            "contrastive" => Ok(LossKind::Contrastive),
            "bce" => Ok(LossKind::Bce),
            "reweighted_ce" => Ok(LossKind::ReweightedCe),
            other => Err(format!("unknown loss kind {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub loss: LossKind,
    /// Margin for the triplet and contrastive hinges.
    pub margin_alpha: f64,
    /// Softmax temperature for infonce.
    pub temperature: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_steps: usize,
    pub rng_seed: u64,
    pub encoder_spec: EncoderSpec,
    /// Validation pairwise accuracy is measured every this many steps.
    pub eval_every: usize,
    pub weight_decay: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            loss: LossKind::Triplet,
            margin_alpha: 0.2,
            temperature: 0.25,
            learning_rate: 3e-4,
            batch_size: 32,
            max_steps: 2000,
            rng_seed: 0,
            encoder_spec: EncoderSpec::default(),
            eval_every: 100,
            weight_decay: 0.01,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.margin_alpha < 0.0 {
            return Err(TrainError::InvalidConfig("margin_alpha must be >= 0".into()));
        }
        if self.temperature <= 0.0 {
            return Err(TrainError::InvalidConfig("temperature must be > 0".into()));
        }
        if self.learning_rate <= 0.0 {
            return Err(TrainError::InvalidConfig("learning_rate must be > 0".into()));
        }
        if self.batch_size == 0 {
            return Err(TrainError::InvalidConfig("batch_size must be > 0".into()));
        }
        if self.eval_every == 0 {
            return Err(TrainError::InvalidConfig("eval_every must be > 0".into()));
        }
        if self.weight_decay < 0.0 {
            return Err(TrainError::InvalidConfig("weight_decay must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLogEntry {
    pub step: usize,
    pub train_loss: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub val_pairwise_accuracy: Option<f64>,
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid train config: {0}")]
    InvalidConfig(String),
    #[error("the {0} split is empty")]
    EmptySplit(&'static str),
    #[error("non-finite loss {value} at step {step}")]
    NonFiniteLoss { step: usize, value: f64 },
    #[error("triplet references missing {what} {id:?}")]
    MissingRecord { what: &'static str, id: String },
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Pixel(#[from] PixelError),
}

/// One training example with everything needed to embed both sides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripletExample {
    pub prompt_id: String,
    pub prompt_text: String,
    pub positive_id: String,
    pub positive_uri: String,
    pub negative_id: String,
    pub negative_uri: String,
}

#[derive(Debug, Clone, Default)]
pub struct TripletDataset {
    pub train: Vec<TripletExample>,
    pub val: Vec<TripletExample>,
    pub test: Vec<TripletExample>,
}

impl TripletDataset {
    /// Resolve triplet records against the store they were curated from.
    pub fn from_store(
        store: &FeedbackStore,
        triplets: &[TripletRecord],
    ) -> Result<Self, TrainError> {
        let mut dataset = TripletDataset::default();
        for t in triplets {
            let prompt = store.prompt(&t.prompt_id).ok_or(TrainError::MissingRecord {
                what: "prompt",
                id: t.prompt_id.clone(),
            })?;
            let pos = store
                .image(&t.positive_image_id)
                .ok_or(TrainError::MissingRecord {
                    what: "image",
                    id: t.positive_image_id.clone(),
                })?;
            let neg = store
                .image(&t.negative_image_id)
                .ok_or(TrainError::MissingRecord {
                    what: "image",
                    id: t.negative_image_id.clone(),
                })?;
            let example = TripletExample {
                prompt_id: t.prompt_id.clone(),
                prompt_text: prompt.text.clone(),
                positive_id: pos.image_id.clone(),
                positive_uri: pos.uri.clone(),
                negative_id: neg.image_id.clone(),
                negative_uri: neg.uri.clone(),
            };
            match t.split {
                crate::curation::Split::Train => dataset.train.push(example),
                crate::curation::Split::Val => dataset.val.push(example),
                crate::curation::Split::Test => dataset.test.push(example),
            }
        }
        Ok(dataset)
    }
}

// ---------------------------------------------------------------------------
// Loss values and gradients on unit embeddings
// ---------------------------------------------------------------------------

/// Gradients of a per-triple loss w.r.t. the three unit embeddings.
#[derive(Debug, Clone)]
pub struct TripleGrads {
    pub anchor: Vec<f64>,
    pub positive: Vec<f64>,
    pub negative: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn axpy(acc: &mut [f64], scale: f64, v: &[f64]) {
    for (a, x) in acc.iter_mut().zip(v) {
        *a += scale * x;
    }
}

/// Numerically stable ln(1 + e^x).
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Value, gradients, and (for hinged kinds) the pre-hinge margin of one loss
/// on unit embeddings. `weight` only scales the reweighted cross-entropy.
pub fn loss_value_and_grad(
    kind: LossKind,
    anchor: &[f64],
    positive: &[f64],
    negative: &[f64],
    alpha: f64,
    temperature: f64,
    weight: f64,
) -> (f64, TripleGrads, Option<f64>) {
    let d = anchor.len();
    let mut grads = TripleGrads {
        anchor: vec![0.0; d],
        positive: vec![0.0; d],
        negative: vec![0.0; d],
    };
    match kind {
        LossKind::Triplet => {
            let pre = squared_distance(anchor, positive) - squared_distance(anchor, negative)
                + alpha;
            let loss = pre.max(0.0);
            if pre > 0.0 {
                // d||a-p||^2/da = 2(a-p); the two anchor terms collapse.
                axpy(&mut grads.anchor, 2.0, negative);
                axpy(&mut grads.anchor, -2.0, positive);
                axpy(&mut grads.positive, -2.0, anchor);
                axpy(&mut grads.positive, 2.0, positive);
                axpy(&mut grads.negative, 2.0, anchor);
                axpy(&mut grads.negative, -2.0, negative);
            }
            (loss, grads, Some(pre))
        }
        LossKind::Infonce => {
            let z_p = dot(anchor, positive) / temperature;
            let z_n = dot(anchor, negative) / temperature;
            let m = z_p.max(z_n);
            let lse = m + ((z_p - m).exp() + (z_n - m).exp()).ln();
            let loss = lse - z_p;
            let q_p = (z_p - lse).exp();
            let q_n = (z_n - lse).exp();
            let ds_p = (q_p - 1.0) / temperature;
            let ds_n = q_n / temperature;
            axpy(&mut grads.anchor, ds_p, positive);
            axpy(&mut grads.anchor, ds_n, negative);
            axpy(&mut grads.positive, ds_p, anchor);
            axpy(&mut grads.negative, ds_n, anchor);
            (loss, grads, None)
        }
        LossKind::Contrastive => {
            let cd_p = 1.0 - dot(anchor, positive);
            let pre = alpha - (1.0 - dot(anchor, negative));
            let hinge = pre.max(0.0);
            let loss = cd_p * cd_p + hinge * hinge;
            let d_sp = -2.0 * cd_p;
            let d_sn = 2.0 * hinge;
            axpy(&mut grads.anchor, d_sp, positive);
            axpy(&mut grads.anchor, d_sn, negative);
            axpy(&mut grads.positive, d_sp, anchor);
            axpy(&mut grads.negative, d_sn, anchor);
            (loss, grads, Some(pre))
        }
        LossKind::Bce | LossKind::ReweightedCe => {
            let w = if kind == LossKind::Bce { 1.0 } else { weight };
            let diff = dot(anchor, positive) - dot(anchor, negative);
            let loss = w * softplus(-diff);
            let d_diff = w * (sigmoid(diff) - 1.0);
            axpy(&mut grads.anchor, d_diff, positive);
            axpy(&mut grads.anchor, -d_diff, negative);
            axpy(&mut grads.positive, d_diff, anchor);
            axpy(&mut grads.negative, -d_diff, anchor);
            (loss, grads, None)
        }
    }
}

/// The margin-ranking triplet loss, exactly
/// `max(0, ||a - p||^2 - ||a - n||^2 + alpha)` on the given vectors.
pub fn triplet_loss(
    anchor: &Embedding,
    positive: &Embedding,
    negative: &Embedding,
    alpha: f64,
) -> Result<f64, TrainError> {
    check_dims(anchor, positive, negative)?;
    let pre = squared_distance(anchor.values(), positive.values())
        - squared_distance(anchor.values(), negative.values())
        + alpha;
    Ok(pre.max(0.0))
}

/// Single-negative scalar form of the alternate losses. Cosines are computed
/// on the given vectors (normalizing if needed); `reweighted_ce` with no
/// dataset context carries weight 1 and so equals `bce`.
pub fn alternate_loss(
    kind: LossKind,
    anchor: &Embedding,
    positive: &Embedding,
    negative: &Embedding,
    cfg: &TrainConfig,
) -> Result<f64, TrainError> {
    check_dims(anchor, positive, negative)?;
    if kind == LossKind::Triplet {
        return triplet_loss(
            &anchor.normalized(),
            &positive.normalized(),
            &negative.normalized(),
            cfg.margin_alpha,
        );
    }
    let a = anchor.normalized();
    let p = positive.normalized();
    let n = negative.normalized();
    let (loss, _, _) = loss_value_and_grad(
        kind,
        a.values(),
        p.values(),
        n.values(),
        cfg.margin_alpha,
        cfg.temperature,
        1.0,
    );
    Ok(loss)
}

fn check_dims(a: &Embedding, p: &Embedding, n: &Embedding) -> Result<(), TrainError> {
    if a.dim() != p.dim() {
        return Err(EncoderError::DimensionMismatch(a.dim(), p.dim()).into());
    }
    if a.dim() != n.dim() {
        return Err(EncoderError::DimensionMismatch(a.dim(), n.dim()).into());
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Gradient checking
// ---------------------------------------------------------------------------

/// Analytic gradient of `kind` w.r.t. the raw (pre-normalization) embedding
/// inputs versus central finite differences. Returns the max relative error
/// over all components. Points within 1e-3 of a hinge kink are resampled,
/// since max(0, x) is not differentiable there.
pub fn grad_check(kind: LossKind, seed: u64) -> f64 {
    const DIM: usize = 8;
    const H: f64 = 1e-5;
    let alpha = 0.2;
    let temperature = 0.25;
    // A fixed non-unit weight so the reweighted path is exercised.
    let weight = 1.7;
    let mut rng = substream(seed, "grad_check");
    let draw = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<f64> {
        loop {
            let v: Vec<f64> = (0..DIM).map(|_| rng::uniform_in(rng, -1.0, 1.0)).collect();
            if v.iter().map(|x| x * x).sum::<f64>().sqrt() > 0.3 {
                return v;
            }
        }
    };
    let scalar = |raw: &[Vec<f64>]| -> f64 {
        let units: Vec<Vec<f64>> = raw.iter().map(|r| normalize(r).0).collect();
        loss_value_and_grad(
            kind, &units[0], &units[1], &units[2], alpha, temperature, weight,
        )
        .0
    };
    // Resample until safely away from any hinge kink.
    let raw: Vec<Vec<f64>> = loop {
        let candidate = vec![draw(&mut rng), draw(&mut rng), draw(&mut rng)];
        let units: Vec<Vec<f64>> = candidate.iter().map(|r| normalize(r).0).collect();
        let (_, _, hinge) = loss_value_and_grad(
            kind, &units[0], &units[1], &units[2], alpha, temperature, weight,
        );
        match hinge {
            Some(margin) if margin.abs() <= 1e-3 => continue,
            _ => break candidate,
        }
    };
    // Analytic gradient through the normalization.
    let mut analytic: Vec<Vec<f64>> = Vec::with_capacity(3);
    {
        let normed: Vec<(Vec<f64>, f64)> = raw.iter().map(|r| normalize(r)).collect();
        let (_, grads, _) = loss_value_and_grad(
            kind,
            &normed[0].0,
            &normed[1].0,
            &normed[2].0,
            alpha,
            temperature,
            weight,
        );
        for (i, g_unit) in [&grads.anchor, &grads.positive, &grads.negative]
            .into_iter()
            .enumerate()
        {
            analytic.push(normalize_backward(&normed[i].0, normed[i].1, g_unit));
        }
    }
    let mut max_rel = 0.0f64;
    let mut probe = raw.clone();
    for v in 0..3 {
        for c in 0..DIM {
            probe[v][c] = raw[v][c] + H;
            let up = scalar(&probe);
            probe[v][c] = raw[v][c] - H;
            let down = scalar(&probe);
            probe[v][c] = raw[v][c];
            let fd = (up - down) / (2.0 * H);
            let g = analytic[v][c];
            let rel = (g - fd).abs() / g.abs().max(fd.abs()).max(1e-6);
            max_rel = max_rel.max(rel);
        }
    }
    max_rel
}

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

/// Decoupled-weight-decay Adam over named tensors.
#[derive(Debug, Clone)]
pub struct AdamW {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
    step_count: u64,
    first_moment: BTreeMap<String, Vec<f64>>,
    second_moment: BTreeMap<String, Vec<f64>>,
}

impl AdamW {
    pub fn new(learning_rate: f64, weight_decay: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay,
            step_count: 0,
            first_moment: BTreeMap::new(),
            second_moment: BTreeMap::new(),
        }
    }

    /// Apply one update to every trainable tensor present in `grads`.
    pub fn step(
        &mut self,
        tensors: Vec<(String, &mut Vec<f64>)>,
        grads: &BTreeMap<String, Vec<f64>>,
        trainable: &BTreeSet<String>,
    ) {
        self.step_count += 1;
        let t = self.step_count as i32;
        let bias1 = 1.0 - self.beta1.powi(t);
        let bias2 = 1.0 - self.beta2.powi(t);
        for (name, data) in tensors {
            if !trainable.contains(&name) {
                continue;
            }
            let Some(grad) = grads.get(&name) else {
                continue;
            };
            let m = self
                .first_moment
                .entry(name.clone())
                .or_insert_with(|| vec![0.0; data.len()]);
            let v = self
                .second_moment
                .entry(name)
                .or_insert_with(|| vec![0.0; data.len()]);
            for i in 0..data.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * grad[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
                let m_hat = m[i] / bias1;
                let v_hat = v[i] / bias2;
                data[i] -= self.learning_rate
                    * (m_hat / (v_hat.sqrt() + self.epsilon) + self.weight_decay * data[i]);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Encoder state at the best validation accuracy (final state when no
    /// evaluation ever ran).
    pub encoder: ReferenceEncoder,
    pub spec: EncoderSpec,
    pub log: Vec<TrainLogEntry>,
    pub best_step: Option<usize>,
    pub best_val_accuracy: Option<f64>,
}

struct ForwardTriple {
    anchor: PathForward,
    positive: PathForward,
    negative: PathForward,
}

/// Pairwise accuracy of the current encoder over examples (ties count 0.5).
pub fn split_accuracy(
    encoder: &ReferenceEncoder,
    examples: &[TripletExample],
    images: &dyn ImageSource,
) -> Result<f64, TrainError> {
    if examples.is_empty() {
        return Err(TrainError::EmptySplit("evaluation"));
    }
    let mut score_sum = 0.0;
    for ex in examples {
        let pos = images.image(&ex.positive_id, &ex.positive_uri)?;
        let neg = images.image(&ex.negative_id, &ex.negative_uri)?;
        let s_p = encoder.score(&ex.prompt_text, &pos)?;
        let s_n = encoder.score(&ex.prompt_text, &neg)?;
        if s_p > s_n {
            score_sum += 1.0;
        } else if s_p == s_n {
            score_sum += 0.5;
        }
    }
    Ok(score_sum / examples.len() as f64)
}

/// Inverse per-prompt triplet frequency, normalized to mean one.
fn reweighting(train: &[TripletExample]) -> BTreeMap<String, f64> {
    let mut freq: BTreeMap<&str, usize> = BTreeMap::new();
    for ex in train {
        *freq.entry(ex.prompt_id.as_str()).or_default() += 1;
    }
    let n_prompts = freq.len() as f64;
    let n_triplets = train.len() as f64;
    freq.into_iter()
        .map(|(prompt, count)| {
            (
                prompt.to_string(),
                n_triplets / (n_prompts * count as f64),
            )
        })
        .collect()
}

/// Mini-batch fine-tuning on the train split; returns the best-validation
/// checkpoint and the per-step log.
pub fn train(
    dataset: &TripletDataset,
    cfg: &TrainConfig,
    encoder: ReferenceEncoder,
    images: &dyn ImageSource,
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    let trainable = encoder.trainable_names(&cfg.encoder_spec)?;
    if dataset.train.is_empty() {
        return Err(TrainError::EmptySplit("train"));
    }
    let weights = reweighting(&dataset.train);
    let mut encoder = encoder;
    let mut optimizer = AdamW::new(cfg.learning_rate, cfg.weight_decay);
    let mut log = Vec::with_capacity(cfg.max_steps);
    let mut best: Option<(f64, usize, ReferenceEncoder)> = None;

    let n = dataset.train.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut cursor = n; // force a shuffle before the first batch
    let mut epoch = 0u64;

    for step in 1..=cfg.max_steps {
        if cursor >= n {
            let mut rng = substream(cfg.rng_seed, &format!("batch_order_{epoch}"));
            rng::shuffle(&mut rng, &mut order);
            epoch += 1;
            cursor = 0;
        }
        let batch_idx: Vec<usize> = order[cursor..(cursor + cfg.batch_size).min(n)].to_vec();
        cursor += batch_idx.len();

        // Forward all three towers for the batch.
        let mut forwards = Vec::with_capacity(batch_idx.len());
        for &i in &batch_idx {
            let ex = &dataset.train[i];
            let pos = images.image(&ex.positive_id, &ex.positive_uri)?;
            let neg = images.image(&ex.negative_id, &ex.negative_uri)?;
            forwards.push(ForwardTriple {
                anchor: encoder.forward_text(&ex.prompt_text)?,
                positive: encoder.forward_image(&pos)?,
                negative: encoder.forward_image(&neg)?,
            });
        }
        let batch = forwards.len() as f64;

        // Loss and gradients w.r.t. the unit embeddings.
        let mut loss = 0.0;
        let mut unit_grads: Vec<TripleGrads> = Vec::with_capacity(forwards.len());
        if cfg.loss == LossKind::Infonce {
            // In-batch negatives: every negative in the batch joins each
            // anchor's denominator.
            let tau = cfg.temperature;
            let d = encoder.dim();
            unit_grads.resize_with(forwards.len(), || TripleGrads {
                anchor: vec![0.0; d],
                positive: vec![0.0; d],
                negative: vec![0.0; d],
            });
            for (i, f) in forwards.iter().enumerate() {
                let z_pos = dot(&f.anchor.unit, &f.positive.unit) / tau;
                let z_negs: Vec<f64> = forwards
                    .iter()
                    .map(|g| dot(&f.anchor.unit, &g.negative.unit) / tau)
                    .collect();
                let m = z_negs.iter().cloned().fold(z_pos, f64::max);
                let lse = m
                    + ((z_pos - m).exp()
                        + z_negs.iter().map(|z| (z - m).exp()).sum::<f64>())
                    .ln();
                loss += lse - z_pos;
                let q_pos = (z_pos - lse).exp();
                axpy(&mut unit_grads[i].anchor, (q_pos - 1.0) / tau, &f.positive.unit);
                axpy(&mut unit_grads[i].positive, (q_pos - 1.0) / tau, &f.anchor.unit);
                for (j, &z) in z_negs.iter().enumerate() {
                    let q = (z - lse).exp();
                    axpy(
                        &mut unit_grads[i].anchor,
                        q / tau,
                        &forwards[j].negative.unit,
                    );
                    axpy(&mut unit_grads[j].negative, q / tau, &f.anchor.unit);
                }
            }
        } else {
            for (&i, f) in batch_idx.iter().zip(&forwards) {
                let weight = weights
                    .get(dataset.train[i].prompt_id.as_str())
                    .copied()
                    .unwrap_or(1.0);
                let (value, grads, _) = loss_value_and_grad(
                    cfg.loss,
                    &f.anchor.unit,
                    &f.positive.unit,
                    &f.negative.unit,
                    cfg.margin_alpha,
                    cfg.temperature,
                    weight,
                );
                loss += value;
                unit_grads.push(grads);
            }
        }
        loss /= batch;
        if !loss.is_finite() {
            return Err(TrainError::NonFiniteLoss { step, value: loss });
        }

        // Backprop into parameter gradients.
        let mut grads: BTreeMap<String, Vec<f64>> = encoder
            .tensors()
            .into_iter()
            .map(|(name, data)| (name, vec![0.0; data.len()]))
            .collect();
        for (f, g) in forwards.iter().zip(&unit_grads) {
            backward_path(&encoder.text, "text", &f.anchor, &g.anchor, batch, &mut grads);
            backward_path(
                &encoder.image,
                "image",
                &f.positive,
                &g.positive,
                batch,
                &mut grads,
            );
            backward_path(
                &encoder.image,
                "image",
                &f.negative,
                &g.negative,
                batch,
                &mut grads,
            );
        }
        optimizer.step(encoder.tensors_mut(), &grads, &trainable);

        let mut entry = TrainLogEntry {
            step,
            train_loss: loss,
            val_pairwise_accuracy: None,
        };
        if step % cfg.eval_every == 0 && !dataset.val.is_empty() {
            let acc = split_accuracy(&encoder, &dataset.val, images)?;
            entry.val_pairwise_accuracy = Some(acc);
            let better = match &best {
                None => true,
                Some((best_acc, _, _)) => acc > *best_acc,
            };
            if better {
                best = Some((acc, step, encoder.clone()));
            }
        }
        log.push(entry);
    }

    let (best_val_accuracy, best_step, final_encoder) = match best {
        Some((acc, step, enc)) => (Some(acc), Some(step), enc),
        None => (None, None, encoder),
    };
    Ok(TrainOutcome {
        encoder: final_encoder,
        spec: cfg.encoder_spec,
        log,
        best_step,
        best_val_accuracy,
    })
}

/// Backward through proj, blocks (reverse), and the input layer of one path,
/// accumulating parameter gradients scaled by 1/batch.
fn backward_path(
    path: &EncoderPath,
    side: &str,
    fwd: &PathForward,
    d_unit: &[f64],
    batch: f64,
    grads: &mut BTreeMap<String, Vec<f64>>,
) {
    let scaled: Vec<f64> = d_unit.iter().map(|g| g / batch).collect();
    let d_raw = normalize_backward(&fwd.unit, fwd.norm, &scaled);
    let mut pw = grads.remove(&format!("{side}.proj.w")).expect("grad buffer");
    let mut pb = grads.remove(&format!("{side}.proj.b")).expect("grad buffer");
    let mut dx = path.proj.backward(&fwd.trunk_out, &d_raw, &mut pw, &mut pb);
    grads.insert(format!("{side}.proj.w"), pw);
    grads.insert(format!("{side}.proj.b"), pb);
    for (i, block) in path.blocks.iter().enumerate().rev() {
        let mut w1 = grads.remove(&format!("{side}.block{i}.w1")).expect("grad buffer");
        let mut b1 = grads.remove(&format!("{side}.block{i}.b1")).expect("grad buffer");
        let mut w2 = grads.remove(&format!("{side}.block{i}.w2")).expect("grad buffer");
        let mut b2 = grads.remove(&format!("{side}.block{i}.b2")).expect("grad buffer");
        dx = block.backward(
            &fwd.block_inputs[i],
            &fwd.block_activations[i],
            &dx,
            &mut w1,
            &mut b1,
            &mut w2,
            &mut b2,
        );
        grads.insert(format!("{side}.block{i}.w1"), w1);
        grads.insert(format!("{side}.block{i}.b1"), b1);
        grads.insert(format!("{side}.block{i}.w2"), w2);
        grads.insert(format!("{side}.block{i}.b2"), b2);
    }
    let mut iw = grads.remove(&format!("{side}.input.w")).expect("grad buffer");
    let mut ib = grads.remove(&format!("{side}.input.b")).expect("grad buffer");
    path.input.backward(&fwd.features, &dx, &mut iw, &mut ib);
    grads.insert(format!("{side}.input.w"), iw);
    grads.insert(format!("{side}.input.b"), ib);
}
