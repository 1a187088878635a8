use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent, portable generator for `(seed, stream)`.
///
/// Row-level randomness is keyed by row index through the stream id, so
/// results do not depend on the order in which rows are processed.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Plain seeded generator for whole-run randomness (data generation, init, shuffling).
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
