//! Counter-based random streams and a few samplers not provided by `rand_distr`.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

/// Independent stream keyed by `(seed, tag, a, b)`; the same key always yields
/// the same sequence, whatever thread consumes it.
pub fn substream(seed: u64, tag: u64, a: u64, b: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    for (i, v) in [seed, tag, a, b].into_iter().enumerate() {
        key[8 * i..8 * i + 8].copy_from_slice(&v.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Draw from the inverse-Gamma law with density `∝ x^(-shape-1) exp(-rate/x)`.
pub fn inv_gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> f64 {
    let g = Gamma::new(shape, 1.0).expect("positive shape").sample(rng);
    rate / g
}
