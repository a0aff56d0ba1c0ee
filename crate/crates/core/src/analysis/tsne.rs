//! Exact (O(n^2)) stochastic neighbor embedding to 2-D.
//!
//! Standard formulation: per-point bandwidths are bisected to a target
//! perplexity, affinities are symmetrized, and the map is optimized with
//! momentum gradient descent under early exaggeration. Deterministic per
//! seed — iteration counts are fixed and the initialization is the only
//! random input.

use crate::rng::{standard_normal, substream};

#[derive(Debug, Clone)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iterations: usize,
    /// `None` picks `max(2, n / (4 * early_exaggeration))`.
    pub learning_rate: Option<f64>,
    pub early_exaggeration: f64,
    pub exaggeration_iters: usize,
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        Self {
            perplexity: 30.0,
            iterations: 400,
            learning_rate: None,
            early_exaggeration: 12.0,
            exaggeration_iters: 100,
            seed: 0,
        }
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Row-wise conditional affinities at the bandwidth matching the target
/// entropy log(perplexity).
fn conditional_row(d2: &[f64], row: usize, perplexity: f64) -> Vec<f64> {
    let n = d2.len();
    let target_entropy = perplexity.ln();
    let mut beta = 1.0;
    let mut beta_min = 0.0f64;
    let mut beta_max = f64::INFINITY;
    let mut probs = vec![0.0; n];
    for _ in 0..64 {
        let mut sum = 0.0;
        for j in 0..n {
            probs[j] = if j == row {
                0.0
            } else {
                (-beta * d2[j]).exp()
            };
            sum += probs[j];
        }
        if sum <= 0.0 {
            // All neighbors infinitely far at this bandwidth; relax it.
            beta_max = beta;
            beta = (beta_min + beta) / 2.0;
            continue;
        }
        let mut entropy = 0.0;
        for p in probs.iter_mut() {
            *p /= sum;
            if *p > 1e-300 {
                entropy -= *p * p.ln();
            }
        }
        let diff = entropy - target_entropy;
        if diff.abs() < 1e-7 {
            break;
        }
        if diff > 0.0 {
            beta_min = beta;
            beta = if beta_max.is_finite() {
                (beta + beta_max) / 2.0
            } else {
                beta * 2.0
            };
        } else {
            beta_max = beta;
            beta = (beta + beta_min) / 2.0;
        }
    }
    probs
}

/// Project points to 2-D.
pub fn project(points: &[Vec<f64>], cfg: &TsneConfig) -> Vec<(f64, f64)> {
    let n = points.len();
    assert!(n >= 2, "projection needs at least two points");
    // Perplexity cannot exceed the neighbor count.
    let perplexity = cfg.perplexity.min(((n - 1) as f64 / 3.0).max(1.0));
    let learning_rate = cfg
        .learning_rate
        .unwrap_or((n as f64 / (4.0 * cfg.early_exaggeration)).max(2.0));

    // Symmetrized affinities.
    let mut p = vec![0.0f64; n * n];
    for i in 0..n {
        let d2: Vec<f64> = (0..n)
            .map(|j| squared_distance(&points[i], &points[j]))
            .collect();
        let row = conditional_row(&d2, i, perplexity);
        for j in 0..n {
            p[i * n + j] = row[j];
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            let sym = (p[i * n + j] + p[j * n + i]) / (2.0 * n as f64);
            let sym = sym.max(1e-12);
            p[i * n + j] = sym;
            p[j * n + i] = sym;
        }
    }

    // Small random init.
    let mut rng = substream(cfg.seed, "tsne_init");
    let mut y: Vec<(f64, f64)> = (0..n)
        .map(|_| {
            (
                1e-4 * standard_normal(&mut rng),
                1e-4 * standard_normal(&mut rng),
            )
        })
        .collect();
    let mut velocity = vec![(0.0f64, 0.0f64); n];

    for iter in 0..cfg.iterations {
        let exaggeration = if iter < cfg.exaggeration_iters {
            cfg.early_exaggeration
        } else {
            1.0
        };
        let momentum = if iter < cfg.iterations / 2 { 0.5 } else { 0.8 };

        // Student-t kernel and its normalizer.
        let mut w = vec![0.0f64; n * n];
        let mut z = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                let dy2 = {
                    let (dx, dyv) = (y[i].0 - y[j].0, y[i].1 - y[j].1);
                    dx * dx + dyv * dyv
                };
                let kernel = 1.0 / (1.0 + dy2);
                w[i * n + j] = kernel;
                w[j * n + i] = kernel;
                z += 2.0 * kernel;
            }
        }
        let z = z.max(1e-12);

        for i in 0..n {
            let mut grad = (0.0f64, 0.0f64);
            for j in 0..n {
                if i == j {
                    continue;
                }
                let kernel = w[i * n + j];
                let q = (kernel / z).max(1e-12);
                let coeff = 4.0 * (exaggeration * p[i * n + j] - q) * kernel;
                grad.0 += coeff * (y[i].0 - y[j].0);
                grad.1 += coeff * (y[i].1 - y[j].1);
            }
            velocity[i].0 = momentum * velocity[i].0 - learning_rate * grad.0;
            velocity[i].1 = momentum * velocity[i].1 - learning_rate * grad.1;
        }
        for (pos, vel) in y.iter_mut().zip(&velocity) {
            pos.0 += vel.0;
            pos.1 += vel.1;
        }
        // Re-center.
        let mean = y.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
        let mean = (mean.0 / n as f64, mean.1 / n as f64);
        for pos in y.iter_mut() {
            pos.0 -= mean.0;
            pos.1 -= mean.1;
        }
    }
    y
}
