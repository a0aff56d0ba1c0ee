//! Seeded randomness with named substreams.
//!
//! Every random choice in the toolkit flows from a single `u64` seed through
//! a named substream, so adding a new consumer never perturbs the draws of an
//! existing one. ChaCha8 is used as the generator because its output stream
//! is stable across platforms and releases.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Stable 64-bit FNV-1a hash, used to derive substream keys from names.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100_0000_01b3);
    }
    hash
}

/// Derive the RNG for substream `name` of the run seed.
pub fn substream(seed: u64, name: &str) -> ChaCha8Rng {
    let tag = fnv1a64(name.as_bytes());
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&tag.to_le_bytes());
    key[16..24].copy_from_slice(&seed.rotate_left(32).to_le_bytes());
    key[24..32].copy_from_slice(&tag.rotate_left(17).to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Uniform f64 in [0, 1) with 53 bits of precision.
pub fn uniform01(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform f64 in [lo, hi).
pub fn uniform_in(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * uniform01(rng)
}

/// Unbiased uniform index in [0, n). Panics if n == 0.
pub fn index_below(rng: &mut ChaCha8Rng, n: usize) -> usize {
    assert!(n > 0, "index_below: empty range");
    let n64 = n as u64;
    // Rejection-sample so the modulo is exact.
    let zone = u64::MAX - u64::MAX % n64;
    loop {
        let v = rng.next_u64();
        if v < zone {
            return (v % n64) as usize;
        }
    }
}

/// Standard normal draw via Box-Muller.
pub fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1 = 1.0 - uniform01(rng); // (0, 1]
    let u2 = uniform01(rng);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Pareto draw with shape `alpha` and scale 1 (support [1, inf)).
pub fn pareto(rng: &mut ChaCha8Rng, alpha: f64) -> f64 {
    let u = uniform01(rng);
    (1.0 - u).powf(-1.0 / alpha)
}

/// In-place Fisher-Yates shuffle.
pub fn shuffle<T>(rng: &mut ChaCha8Rng, items: &mut [T]) {
    for i in (1..items.len()).rev() {
        let j = index_below(rng, i + 1);
        items.swap(i, j);
    }
}

/// Sample k distinct indices from [0, n) uniformly without replacement.
/// Returned in draw order. Panics if k > n.
pub fn sample_without_replacement(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    assert!(k <= n, "cannot sample {k} from {n}");
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = i + index_below(rng, n - i);
        pool.swap(i, j);
    }
    pool.truncate(k);
    pool
}
