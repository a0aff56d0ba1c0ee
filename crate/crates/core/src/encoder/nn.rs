//! Dense layers with hand-written forward/backward passes.
//!
//! The reference encoder is small enough that explicit f64 backprop both
//! trains in seconds on a CPU and stays bit-deterministic, which the
//! training and end-to-end reproducibility contracts rely on.

use rand_chacha::ChaCha8Rng;

use crate::rng::uniform_in;

/// Fully connected layer; `w` is row-major `n_out x n_in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub n_in: usize,
    pub n_out: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Linear {
    /// Xavier-uniform initialization.
    pub fn init(rng: &mut ChaCha8Rng, n_in: usize, n_out: usize) -> Self {
        let bound = (6.0 / (n_in + n_out) as f64).sqrt();
        let w = (0..n_in * n_out)
            .map(|_| uniform_in(rng, -bound, bound))
            .collect();
        let b = (0..n_out).map(|_| uniform_in(rng, -0.1, 0.1)).collect();
        Self { n_in, n_out, w, b }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.n_in);
        let mut y = self.b.clone();
        for (o, y_o) in y.iter_mut().enumerate() {
            let row = &self.w[o * self.n_in..(o + 1) * self.n_in];
            *y_o += row.iter().zip(x).map(|(w, x)| w * x).sum::<f64>();
        }
        y
    }

    /// Backpropagate `dy`; accumulates parameter gradients and returns dx.
    pub fn backward(&self, x: &[f64], dy: &[f64], dw: &mut [f64], db: &mut [f64]) -> Vec<f64> {
        debug_assert_eq!(dy.len(), self.n_out);
        debug_assert_eq!(dw.len(), self.w.len());
        let mut dx = vec![0.0; self.n_in];
        for (o, &g) in dy.iter().enumerate() {
            db[o] += g;
            let row = &self.w[o * self.n_in..(o + 1) * self.n_in];
            let drow = &mut dw[o * self.n_in..(o + 1) * self.n_in];
            for i in 0..self.n_in {
                drow[i] += g * x[i];
                dx[i] += g * row[i];
            }
        }
        dx
    }
}

/// Residual MLP block: `y = x + w2 * tanh(w1 * x + b1) + b2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResBlock {
    pub hidden: Linear,
    pub out: Linear,
}

impl ResBlock {
    pub fn init(rng: &mut ChaCha8Rng, dim: usize) -> Self {
        Self {
            hidden: Linear::init(rng, dim, dim),
            out: Linear::init(rng, dim, dim),
        }
    }

    /// Returns (y, tanh activations) — the activations are the backward cache.
    pub fn forward(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let h: Vec<f64> = self.hidden.forward(x).iter().map(|v| v.tanh()).collect();
        let mut y = self.out.forward(&h);
        for (y_i, x_i) in y.iter_mut().zip(x) {
            *y_i += x_i;
        }
        (y, h)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn backward(
        &self,
        x: &[f64],
        h: &[f64],
        dy: &[f64],
        dw1: &mut [f64],
        db1: &mut [f64],
        dw2: &mut [f64],
        db2: &mut [f64],
    ) -> Vec<f64> {
        let dh = self.out.backward(h, dy, dw2, db2);
        let dpre: Vec<f64> = dh
            .iter()
            .zip(h)
            .map(|(g, h_i)| g * (1.0 - h_i * h_i))
            .collect();
        let mut dx = self.hidden.backward(x, &dpre, dw1, db1);
        for (dx_i, dy_i) in dx.iter_mut().zip(dy) {
            *dx_i += dy_i;
        }
        dx
    }
}

/// L2-normalize; returns (unit, norm). Norm is floored to avoid division by
/// zero on degenerate inputs.
pub fn normalize(raw: &[f64]) -> (Vec<f64>, f64) {
    let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-30);
    (raw.iter().map(|v| v / norm).collect(), norm)
}

/// Backward of L2 normalization: given d(unit), returns d(raw).
pub fn normalize_backward(unit: &[f64], norm: f64, d_unit: &[f64]) -> Vec<f64> {
    let inner: f64 = unit.iter().zip(d_unit).map(|(u, g)| u * g).sum();
    unit.iter()
        .zip(d_unit)
        .map(|(u, g)| (g - u * inner) / norm)
        .collect()
}
