//! Seeded random streams.
//!
//! Every run starts from one user-visible `u64` seed. Each purpose draws from
//! its own ChaCha8 stream (`seed`, stream id = [`Stream`] discriminant), so
//! adding draws for one purpose never shifts the numbers seen by another and
//! results are identical across platforms.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    /// Parameter initialisation.
    Init = 1,
    /// Minibatch order and validation carving.
    Shuffle = 2,
    /// Train/test row partitions.
    Split = 3,
    /// Synthetic input data.
    Data = 4,
    /// Ground-truth transforms for synthetic experiments.
    GroundTruth = 5,
}

pub fn stream(seed: u64, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}

/// Derive a child seed, e.g. one per synthetic model variant.
pub fn child_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 finaliser
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
