//! Counter-based random streams.
//!
//! Every run has one master seed. Arm `i` draws its transitions from ChaCha
//! stream `i`; the remaining consumers use reserved streams at the top of the
//! stream space, so adding or removing arms never reshuffles anyone else.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub const EXPLORATION_STREAM: u64 = u64::MAX;
pub const INSTANCE_STREAM: u64 = u64::MAX - 1;
pub const REPLAY_STREAM: u64 = u64::MAX - 2;

/// Stream `id` of the generator keyed by `master`.
pub fn stream(master: u64, id: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(id);
    rng
}

pub fn arm_stream(master: u64, arm: usize) -> StreamRng {
    stream(master, arm as u64)
}

/// Mixes a master seed with a seed index (splitmix64 finalizer).
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
