//! Seeded generators. Every stochastic routine in this crate takes its
//! generator from the caller; nothing reads global state.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Generator = ChaCha8Rng;

pub fn seeded(seed: u64) -> Generator {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream for a sub-component (environment, evaluation, ...)
/// of a run seeded with `seed`.
pub fn substream(seed: u64, stream: u64) -> Generator {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draw an index from a probability vector.
pub fn categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    WeightedIndex::new(probs)
        .expect("probability row must have positive mass")
        .sample(rng)
}
