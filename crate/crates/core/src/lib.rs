//! Social-reward modeling toolkit.
//!
//! Turns implicit engagement logs over generated images into curated
//! preference triplets, trains a dual-encoder scoring model on them,
//! evaluates scorers by pairwise accuracy, analyzes prompt distributions,
//! and assembles reward-guided fine-tuning datasets.

pub mod analysis;
pub mod curation;
pub mod encoder;
pub mod eval;
pub mod finetune;
pub mod jsonl;
pub mod pixels;
pub mod rng;
pub mod sim;
pub mod store;
pub mod svg;
pub mod trainer;
