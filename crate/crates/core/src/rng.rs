//! Reproducible random-number streams.
//!
//! Every stochastic stage derives its own counter-based generator from the
//! master seed, a purpose tag and optional indices (vehicle id, day, run).
//! Streams are independent of each other and of evaluation order, so
//! per-vehicle sampling can run in parallel and still reproduce the serial
//! result bit for bit.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Derive an independent generator for `(seed, tag, indices)`.
pub fn stream(seed: u64, tag: &str, indices: &[u64]) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update([0xfe]);
    hasher.update(tag.as_bytes());
    for ix in indices {
        hasher.update([0xff]);
        hasher.update(ix.to_le_bytes());
    }
    let key: [u8; 32] = hasher.finalize().into();
    ChaCha8Rng::from_seed(key)
}
