//! Seeded randomness.
//!
//! Every random stream in the crate is a PCG-XSL-RR 128/64 generator
//! ([`rand_pcg::Pcg64`]). Long-lived consumers (agent exploration, replay
//! sampling, per-episode apple spawns) derive a fresh generator from a
//! `(seed, stream, counter)` triple, so no generator state has to be
//! persisted in checkpoints to resume a run bit-for-bit.

use rand::SeedableRng;
pub use rand_pcg::Pcg64;

/// Named independent streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Init = 1,
    Action = 2,
    Sample = 3,
    TrainEnv = 4,
    EvalEnv = 5,
    EvalAction = 6,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mix a seed, a stream id and a counter into one 64-bit seed.
pub fn derive_seed(seed: u64, stream: Stream, counter: u64) -> u64 {
    splitmix64(splitmix64(seed ^ splitmix64(stream as u64)) ^ counter)
}

pub fn seeded(seed: u64) -> Pcg64 {
    Pcg64::seed_from_u64(seed)
}

pub fn stream_rng(seed: u64, stream: Stream, counter: u64) -> Pcg64 {
    seeded(derive_seed(seed, stream, counter))
}
