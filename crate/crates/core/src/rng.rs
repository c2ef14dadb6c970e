//! Deterministic RNG substreams.
//!
//! Every randomized stage derives its own ChaCha stream from (seed, domain,
//! indices), so results are independent of evaluation order and thread
//! count, and any single particle or candidate can be replayed in isolation.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Namespaces keeping unrelated stages off each other's streams.
#[derive(Debug, Clone, Copy)]
pub enum Domain {
    /// Candidate sampling inside the optimizer, indexed by generation.
    Sampler = 1,
    /// Stochastic belief rollouts, indexed by (horizon, particle).
    Rollout = 2,
    /// Monte-Carlo oracle draws, indexed by sample.
    Oracle = 3,
    /// Initial belief sampling.
    Belief = 4,
    /// Plan evaluation rollouts, indexed by trial.
    Evaluate = 5,
    /// Simulated world noise during closed-loop runs.
    World = 6,
}

/// Stream for `(seed, domain, a, b)`. Indices must fit 28 bits each, which
/// every caller satisfies by construction.
pub fn stream(seed: u64, domain: Domain, a: u64, b: u64) -> ChaCha8Rng {
    debug_assert!(a < (1 << 28) && b < (1 << 28));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((domain as u64) << 56) | (a << 28) | b);
    rng
}
