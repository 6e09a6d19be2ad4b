//! Deterministic seed derivation.
//!
//! Every random task is seeded from `(master seed, task path)` so that fan-out
//! over workers never changes results. The derivation is 64-bit FNV-1a over the
//! little-endian bytes of the master seed followed by the UTF-8 bytes of the
//! task path.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a64(bytes: impl IntoIterator<Item = u8>) -> u64 {
    bytes.into_iter().fold(FNV_OFFSET, |h, b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// Derive a task seed from a master seed and a task path such as `"brown/path/17"`.
pub fn derive_seed(master: u64, task_path: &str) -> u64 {
    fnv1a64(master.to_le_bytes().into_iter().chain(task_path.bytes()))
}

/// The generator used for every stochastic component.
pub type Rng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
