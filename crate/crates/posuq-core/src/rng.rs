//! Deterministic seeded random streams.
//!
//! Every consumer of randomness owns a private ChaCha stream derived from a
//! root seed plus a textual label and an index. Streams for different
//! (label, index) pairs are independent, so per-UE / per-tree / per-sample
//! work can run in any order (or in parallel) and still reproduce
//! bit-for-bit.

use rand_chacha::ChaCha12Rng;
use rand_core::{RngCore, SeedableRng};

/// FNV-1a style mix of (root, label, index) into a 64-bit stream seed.
pub fn derive_seed(root: u64, label: &str, index: u64) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET;
    for b in root
        .to_le_bytes()
        .iter()
        .chain(label.as_bytes())
        .chain(index.to_le_bytes().iter())
    {
        h ^= u64::from(*b);
        h = h.wrapping_mul(PRIME);
    }
    h
}

/// New stream for (root, label, index).
pub fn stream(root: u64, label: &str, index: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(derive_seed(root, label, index))
}

/// Uniform draw in [0, 1) with 53 bits of precision.
pub fn uniform(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform draw in [lo, hi).
pub fn uniform_in(rng: &mut impl RngCore, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * uniform(rng)
}

/// Standard normal draw (Box-Muller, one value per call).
pub fn standard_normal(rng: &mut impl RngCore) -> f64 {
    // u in (0, 1] so the log is finite.
    let u = 1.0 - uniform(rng);
    let v = uniform(rng);
    libm::sqrt(-2.0 * libm::log(u)) * libm::cos(2.0 * core::f64::consts::PI * v)
}

/// Exponential draw with the given mean (inverse CDF).
pub fn exponential(rng: &mut impl RngCore, mean: f64) -> f64 {
    let u = 1.0 - uniform(rng);
    -mean * libm::log(u)
}

/// Uniform index in [0, n).
pub fn index(rng: &mut impl RngCore, n: usize) -> usize {
    debug_assert!(n > 0);
    (uniform(rng) * n as f64) as usize % n
}
