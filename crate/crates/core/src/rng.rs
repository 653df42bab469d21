//! Deterministic random-number plumbing.
//!
//! Every randomized operation in this crate owns an RNG seeded from its
//! arguments. Parallel work is split into fixed-size chunks, each driven by
//! a counter-based substream derived from `(seed, chunk index)`, so results
//! depend on the declared chunk size but never on the number of threads.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::ops::Range;

/// Default number of work items per parallel chunk.
pub const DEFAULT_CHUNK_SIZE: usize = 1 << 16;

/// SplitMix64 finalizer; bijective on u64.
#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a master seed and a path of integer labels.
///
/// Distinct paths yield statistically independent seeds; the derivation is
/// stable across platforms and releases of this crate.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    let mut h = mix(master ^ 0x9E37_79B9_7F4A_7C15);
    for &part in path {
        h = mix(h.wrapping_mul(0x2545_F491_4F6C_DD1D) ^ part.wrapping_add(0x9E37_79B9_7F4A_7C15));
    }
    h
}

/// Counter-based substream: one independent generator per `(seed, stream)`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Splits `0..total` into consecutive chunks of at most `chunk_size` items.
pub fn chunk_ranges(total: usize, chunk_size: usize) -> Vec<Range<usize>> {
    assert!(chunk_size > 0, "chunk size must be positive");
    let mut out = Vec::with_capacity(total.div_ceil(chunk_size));
    let mut start = 0;
    while start < total {
        let end = (start + chunk_size).min(total);
        out.push(start..end);
        start = end;
    }
    out
}
