//! Dual-encoder interface and the deterministic CPU-trainable reference
//! encoder.
//!
//! The reference text path hashes token n-grams into a fixed vocabulary,
//! runs two residual MLP blocks, and projects to `d` dimensions; the image
//! path feeds 4x4 patch means through three residual blocks and a
//! projection. "Fine-tune the last k blocks" is therefore structurally
//! meaningful while a full training run takes seconds. Larger pretrained
//! dual encoders plug in behind the [`DualEncoder`] trait.

pub mod nn;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pixels::ImageTensor;
use crate::rng::{fnv1a64, substream};
use nn::{normalize, Linear, ResBlock};

/// Hash bins for text token n-grams.
pub const VOCAB_BINS: usize = 256;
/// Width of the residual trunk.
pub const HIDDEN_DIM: usize = 64;
/// Patch grid edge for image features (4x4 patches x 3 channels).
pub const IMAGE_GRID: usize = 4;
/// Minimum accepted image side length.
pub const MIN_IMAGE_SIDE: usize = 32;
/// Default embedding dimension.
pub const DEFAULT_DIM: usize = 64;

pub const TEXT_BLOCKS: usize = 2;
pub const IMAGE_BLOCKS: usize = 3;

const CHECKPOINT_VERSION: u32 = 1;
const CHECKPOINT_KIND: &str = "reference-dual-encoder";

#[derive(Debug, Error)]
pub enum EncoderError {
    #[error("text is empty")]
    EmptyText,
    #[error("image {height}x{width} below encoder minimum {min}")]
    BadShape {
        height: usize,
        width: usize,
        min: usize,
    },
    #[error("{side} encoder has {available} blocks, {requested} requested trainable")]
    SpecExceedsDepth {
        side: &'static str,
        requested: usize,
        available: usize,
    },
    #[error("embedding dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("bad checkpoint {path}: {reason}")]
    BadCheckpoint { path: String, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A d-dimensional real vector produced by an encoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    values: Vec<f64>,
}

impl Embedding {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Unit-norm copy.
    pub fn normalized(&self) -> Embedding {
        Embedding {
            values: normalize(&self.values).0,
        }
    }

    pub fn dot(&self, other: &Embedding) -> Result<f64, EncoderError> {
        if self.dim() != other.dim() {
            return Err(EncoderError::DimensionMismatch(self.dim(), other.dim()));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum())
    }

    /// Cosine similarity (normalizes both sides).
    pub fn cosine(&self, other: &Embedding) -> Result<f64, EncoderError> {
        let c = self.normalized().dot(&other.normalized())?;
        Ok(c.clamp(-1.0, 1.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EncoderVariant {
    Reference,
    ExternalAdapter,
}

/// Which trailing blocks of each path are trainable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderSpec {
    pub text_trainable_blocks: usize,
    pub image_trainable_blocks: usize,
    pub d: usize,
    pub variant: EncoderVariant,
}

impl Default for EncoderSpec {
    fn default() -> Self {
        Self {
            text_trainable_blocks: TEXT_BLOCKS,
            image_trainable_blocks: IMAGE_BLOCKS,
            d: DEFAULT_DIM,
            variant: EncoderVariant::Reference,
        }
    }
}

impl EncoderSpec {
    /// Frozen spec: no trainable blocks on either path.
    pub fn frozen() -> Self {
        Self {
            text_trainable_blocks: 0,
            image_trainable_blocks: 0,
            ..Self::default()
        }
    }
}

/// Text + image embedding interface all scorers and trainers work against.
pub trait DualEncoder {
    fn dim(&self) -> usize;
    fn embed_text(&self, text: &str) -> Result<Embedding, EncoderError>;
    fn embed_image(&self, image: &ImageTensor) -> Result<Embedding, EncoderError>;

    /// Cosine similarity of the two unit embeddings.
    fn score(&self, text: &str, image: &ImageTensor) -> Result<f64, EncoderError> {
        let t = self.embed_text(text)?;
        let i = self.embed_image(image)?;
        Ok(t.dot(&i)?.clamp(-1.0, 1.0))
    }
}

/// One encoding path: input projection, residual trunk, output projection.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderPath {
    pub input: Linear,
    pub blocks: Vec<ResBlock>,
    pub proj: Linear,
}

impl EncoderPath {
    fn init(rng: &mut rand_chacha::ChaCha8Rng, n_features: usize, n_blocks: usize, d: usize) -> Self {
        Self {
            input: Linear::init(rng, n_features, HIDDEN_DIM),
            blocks: (0..n_blocks).map(|_| ResBlock::init(rng, HIDDEN_DIM)).collect(),
            proj: Linear::init(rng, HIDDEN_DIM, d),
        }
    }

    /// Forward pass with the caches the backward pass needs.
    pub fn forward(&self, features: &[f64]) -> PathForward {
        let x0 = self.input.forward(features);
        let mut inputs = Vec::with_capacity(self.blocks.len());
        let mut activations = Vec::with_capacity(self.blocks.len());
        let mut x = x0;
        for block in &self.blocks {
            inputs.push(x.clone());
            let (y, h) = block.forward(&x);
            activations.push(h);
            x = y;
        }
        let raw = self.proj.forward(&x);
        let (unit, norm) = normalize(&raw);
        PathForward {
            features: features.to_vec(),
            block_inputs: inputs,
            block_activations: activations,
            trunk_out: x,
            unit,
            norm,
        }
    }
}

/// Cached intermediate state of one path forward pass.
#[derive(Debug, Clone)]
pub struct PathForward {
    pub features: Vec<f64>,
    pub block_inputs: Vec<Vec<f64>>,
    pub block_activations: Vec<Vec<f64>>,
    pub trunk_out: Vec<f64>,
    pub unit: Vec<f64>,
    pub norm: f64,
}

/// The small deterministic reference dual encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceEncoder {
    d: usize,
    pub text: EncoderPath,
    pub image: EncoderPath,
}

impl ReferenceEncoder {
    pub fn new(d: usize, init_seed: u64) -> Self {
        let mut rng = substream(init_seed, "encoder_init");
        Self {
            d,
            text: EncoderPath::init(&mut rng, VOCAB_BINS, TEXT_BLOCKS, d),
            image: EncoderPath::init(&mut rng, IMAGE_GRID * IMAGE_GRID * 3, IMAGE_BLOCKS, d),
        }
    }

    /// Hashed unigram+bigram counts, L2-normalized.
    pub fn text_features(&self, text: &str) -> Result<Vec<f64>, EncoderError> {
        let tokens: Vec<String> = text
            .split_whitespace()
            .map(|t| t.to_lowercase())
            .collect();
        if tokens.is_empty() {
            return Err(EncoderError::EmptyText);
        }
        let mut counts = vec![0.0f64; VOCAB_BINS];
        for token in &tokens {
            counts[(fnv1a64(token.as_bytes()) as usize) % VOCAB_BINS] += 1.0;
        }
        for pair in tokens.windows(2) {
            let bigram = format!("{} {}", pair[0], pair[1]);
            counts[(fnv1a64(bigram.as_bytes()) as usize) % VOCAB_BINS] += 1.0;
        }
        Ok(normalize(&counts).0)
    }

    /// Centered per-channel patch means over a 4x4 grid.
    pub fn image_features(&self, image: &ImageTensor) -> Result<Vec<f64>, EncoderError> {
        let (h, w) = (image.height(), image.width());
        if h < MIN_IMAGE_SIDE || w < MIN_IMAGE_SIDE {
            return Err(EncoderError::BadShape {
                height: h,
                width: w,
                min: MIN_IMAGE_SIDE,
            });
        }
        let mut features = Vec::with_capacity(IMAGE_GRID * IMAGE_GRID * 3);
        for gy in 0..IMAGE_GRID {
            let y0 = gy * h / IMAGE_GRID;
            let y1 = (gy + 1) * h / IMAGE_GRID;
            for gx in 0..IMAGE_GRID {
                let x0 = gx * w / IMAGE_GRID;
                let x1 = (gx + 1) * w / IMAGE_GRID;
                for c in 0..3 {
                    features.push(2.0 * (image.block_mean(y0, y1, x0, x1, c) - 0.5));
                }
            }
        }
        Ok(features)
    }

    pub fn forward_text(&self, text: &str) -> Result<PathForward, EncoderError> {
        Ok(self.text.forward(&self.text_features(text)?))
    }

    pub fn forward_image(&self, image: &ImageTensor) -> Result<PathForward, EncoderError> {
        Ok(self.image.forward(&self.image_features(image)?))
    }

    /// All parameter tensors as (name, data) in a fixed order.
    pub fn tensors(&self) -> Vec<(String, &Vec<f64>)> {
        let mut out = Vec::new();
        for (side, path) in [("text", &self.text), ("image", &self.image)] {
            out.push((format!("{side}.input.w"), &path.input.w));
            out.push((format!("{side}.input.b"), &path.input.b));
            for (i, block) in path.blocks.iter().enumerate() {
                out.push((format!("{side}.block{i}.w1"), &block.hidden.w));
                out.push((format!("{side}.block{i}.b1"), &block.hidden.b));
                out.push((format!("{side}.block{i}.w2"), &block.out.w));
                out.push((format!("{side}.block{i}.b2"), &block.out.b));
            }
            out.push((format!("{side}.proj.w"), &path.proj.w));
            out.push((format!("{side}.proj.b"), &path.proj.b));
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut Vec<f64>)> {
        let mut out = Vec::new();
        for (side, path) in [("text", &mut self.text), ("image", &mut self.image)] {
            out.push((format!("{side}.input.w"), &mut path.input.w));
            out.push((format!("{side}.input.b"), &mut path.input.b));
            for (i, block) in path.blocks.iter_mut().enumerate() {
                out.push((format!("{side}.block{i}.w1"), &mut block.hidden.w));
                out.push((format!("{side}.block{i}.b1"), &mut block.hidden.b));
                out.push((format!("{side}.block{i}.w2"), &mut block.out.w));
                out.push((format!("{side}.block{i}.b2"), &mut block.out.b));
            }
            out.push((format!("{side}.proj.w"), &mut path.proj.w));
            out.push((format!("{side}.proj.b"), &mut path.proj.b));
        }
        out
    }

    /// Names of the parameters the `EncoderSpec` marks trainable: exactly the last
    /// `text_trainable_blocks` / `image_trainable_blocks` residual blocks.
    pub fn trainable_names(
        &self,
        spec: &EncoderSpec,
    ) -> Result<std::collections::BTreeSet<String>, EncoderError> {
        if spec.text_trainable_blocks > self.text.blocks.len() {
            return Err(EncoderError::SpecExceedsDepth {
                side: "text",
                requested: spec.text_trainable_blocks,
                available: self.text.blocks.len(),
            });
        }
        if spec.image_trainable_blocks > self.image.blocks.len() {
            return Err(EncoderError::SpecExceedsDepth {
                side: "image",
                requested: spec.image_trainable_blocks,
                available: self.image.blocks.len(),
            });
        }
        let mut names = std::collections::BTreeSet::new();
        let mut take = |side: &str, total: usize, k: usize| {
            for i in total - k..total {
                for suffix in ["w1", "b1", "w2", "b2"] {
                    names.insert(format!("{side}.block{i}.{suffix}"));
                }
            }
        };
        take("text", self.text.blocks.len(), spec.text_trainable_blocks);
        take("image", self.image.blocks.len(), spec.image_trainable_blocks);
        Ok(names)
    }

    /// Total parameter count across the named tensors.
    pub fn parameter_count(&self, names: &std::collections::BTreeSet<String>) -> usize {
        self.tensors()
            .iter()
            .filter(|(name, _)| names.contains(name))
            .map(|(_, data)| data.len())
            .sum()
    }
}

impl DualEncoder for ReferenceEncoder {
    fn dim(&self) -> usize {
        self.d
    }

    fn embed_text(&self, text: &str) -> Result<Embedding, EncoderError> {
        Ok(Embedding::new(self.forward_text(text)?.unit))
    }

    fn embed_image(&self, image: &ImageTensor) -> Result<Embedding, EncoderError> {
        Ok(Embedding::new(self.forward_image(image)?.unit))
    }
}

/// Self-describing checkpoint container.
#[derive(Debug, Serialize, Deserialize)]
struct CheckpointFile {
    format_version: u32,
    kind: String,
    d: usize,
    vocab_bins: usize,
    hidden_dim: usize,
    spec: EncoderSpec,
    params: BTreeMap<String, Vec<f64>>,
}

pub fn save_checkpoint(
    encoder: &ReferenceEncoder,
    spec: &EncoderSpec,
    path: &Path,
) -> Result<(), EncoderError> {
    let params: BTreeMap<String, Vec<f64>> = encoder
        .tensors()
        .into_iter()
        .map(|(name, data)| (name, data.clone()))
        .collect();
    let file = CheckpointFile {
        format_version: CHECKPOINT_VERSION,
        kind: CHECKPOINT_KIND.to_string(),
        d: encoder.dim(),
        vocab_bins: VOCAB_BINS,
        hidden_dim: HIDDEN_DIM,
        spec: *spec,
        params,
    };
    let json = serde_json::to_string(&file).expect("checkpoint serializes");
    std::fs::write(path, json)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(ReferenceEncoder, EncoderSpec), EncoderError> {
    let display = path.display().to_string();
    let bytes = std::fs::read(path)?;
    let file: CheckpointFile =
        serde_json::from_slice(&bytes).map_err(|e| EncoderError::BadCheckpoint {
            path: display.clone(),
            reason: e.to_string(),
        })?;
    let bad = |reason: String| EncoderError::BadCheckpoint {
        path: display.clone(),
        reason,
    };
    if file.format_version != CHECKPOINT_VERSION {
        return Err(bad(format!(
            "format_version {} unsupported",
            file.format_version
        )));
    }
    if file.kind != CHECKPOINT_KIND {
        return Err(bad(format!("kind {:?} unsupported", file.kind)));
    }
    if file.vocab_bins != VOCAB_BINS || file.hidden_dim != HIDDEN_DIM {
        return Err(bad("architecture constants differ from this build".into()));
    }
    let mut encoder = ReferenceEncoder::new(file.d, 0);
    for (name, data) in encoder.tensors_mut() {
        let stored = file
            .params
            .get(&name)
            .ok_or_else(|| EncoderError::BadCheckpoint {
                path: display.clone(),
                reason: format!("missing tensor {name}"),
            })?;
        if stored.len() != data.len() {
            return Err(EncoderError::BadCheckpoint {
                path: display.clone(),
                reason: format!(
                    "tensor {name} has {} values, expected {}",
                    stored.len(),
                    data.len()
                ),
            });
        }
        data.copy_from_slice(stored);
    }
    Ok((encoder, file.spec))
}
