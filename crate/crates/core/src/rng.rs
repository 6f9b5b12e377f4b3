//! Per-item deterministic random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// 64-bit key derived from a global seed and an item identifier.
///
/// Stable across platforms and releases, so a batch can be processed in any
/// order or on any number of workers and still draw the same numbers.
pub fn item_seed(seed: u64, item_id: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update((item_id.len() as u64).to_le_bytes());
    hasher.update(item_id.as_bytes());
    let digest = hasher.finalize();
    let mut head = [0u8; 8];
    head.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(head)
}

pub fn item_rng(seed: u64, item_id: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(item_seed(seed, item_id))
}
