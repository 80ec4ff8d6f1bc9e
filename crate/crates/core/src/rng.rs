//! Deterministic random substreams.
//!
//! Each trial owns an independent ChaCha stream whose seed is a pure function of the
//! master seed, a stream key and the task id. Trials can therefore be evaluated in any
//! order, on any number of threads, and still reproduce bit-for-bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
pub fn mix64(mut x: u64) -> u64 {
    x ^= x >> 30;
    x = x.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x ^= x >> 27;
    x = x.wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// FNV-1a over the UTF-8 bytes; stable across platforms and releases.
pub fn stable_hash(key: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in key.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

pub fn substream_seed(master_seed: u64, stream_key: &str, task_id: u64) -> u64 {
    let a = mix64(master_seed.wrapping_add(GOLDEN));
    let b = mix64(stream_key_hash(stream_key) ^ a);
    mix64(b ^ mix64(task_id.wrapping_mul(GOLDEN).wrapping_add(1)))
}

fn stream_key_hash(key: &str) -> u64 {
    mix64(stable_hash(key))
}

pub fn substream(master_seed: u64, stream_key: &str, task_id: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(substream_seed(master_seed, stream_key, task_id))
}

pub fn sequential(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
