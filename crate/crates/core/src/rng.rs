//! Keyed random streams.
//!
//! Every trial in a sweep draws from its own ChaCha stream whose 256-bit key is
//! `(master seed, n, trial, purpose)`. Streams never overlap, so trials can run
//! in any order or concurrently and still reproduce bit-for-bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Purpose tags keep the streams used for different draws inside one trial apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Graph = 1,
    Features = 2,
    Params = 3,
    Perturbation = 4,
}

pub fn stream(master: u64, n: u64, trial: u64, purpose: Purpose) -> StreamRng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&master.to_le_bytes());
    key[8..16].copy_from_slice(&n.to_le_bytes());
    key[16..24].copy_from_slice(&trial.to_le_bytes());
    key[24..32].copy_from_slice(&(purpose as u64).to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

pub fn from_seed(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}
