use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent random stream for sample `index` of a run seeded with `seed`.
///
/// Every sample owns its stream, so results do not depend on the order in
/// which samples are evaluated or on how many workers evaluate them.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Chunk size used when reducing per-sample values; fixed so that the
/// floating-point summation order never depends on the thread count.
pub(crate) const REDUCE_CHUNK: usize = 4096;
