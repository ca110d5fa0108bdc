//! Seed plumbing. Every random draw in the crate comes from a `ChaCha8Rng`
//! seeded through [`derive`], so a run is a pure function of its master seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Pipeline stage tags mixed into derived seeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stage {
    Init = 1,
    PreCollection = 2,
    TrainIdm = 3,
    TrainPolicy = 4,
    Rollout = 5,
    TrainDiscriminator = 6,
    Evaluation = 7,
    Expert = 8,
    RandomReference = 9,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `seed = mix(mix(mix(master) ^ stage) ^ epoch)`.
pub fn derive(master: u64, stage: Stage, epoch: u64) -> u64 {
    let s = splitmix64(master);
    let s = splitmix64(s ^ stage as u64);
    splitmix64(s ^ epoch)
}

/// Sub-stream for the `index`-th item inside a stage (episode, model, ...).
pub fn child(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index.wrapping_add(0x5851_F42D_4C95_7F2D)))
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
