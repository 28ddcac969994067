//! Seeded random streams.
//!
//! All randomness comes from ChaCha8, a counter-based generator: a 64-bit
//! seed is expanded into the 256-bit key and a separate 64-bit stream id
//! selects an independent keystream. Streams are assigned as follows:
//!
//! | consumer                     | seed                 | stream                         |
//! |------------------------------|----------------------|--------------------------------|
//! | per-sequence attempt seeds   | master seed          | `pair_index << 32 | seq_index` |
//! | scene sampling               | attempt seed         | [`SCENE_STREAM`]               |
//! | start-pose sampling          | attempt seed         | [`START_POSE_STREAM`]          |
//! | epoch balancing              | balance seed         | epoch index                    |
//!
//! Because every sequence owns its stream, generation output does not depend
//! on how sequences are scheduled across worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub const SCENE_STREAM: u64 = 0;
pub const START_POSE_STREAM: u64 = 1;

pub fn stream_rng(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn sequence_stream(pair_index: u32, seq_index: u32) -> u64 {
    (u64::from(pair_index) << 32) | u64::from(seq_index)
}
