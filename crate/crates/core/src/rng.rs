//! Seeded random streams.
//!
//! Every trajectory owns a `ChaCha8Rng` built from a 64-bit seed. Campaigns
//! derive one seed per `(master_seed, sigma index, trajectory index)` with a
//! SplitMix64 mix, so any single trajectory can be replayed from its recorded
//! seed alone and results never depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type TrajectoryRng = ChaCha8Rng;

pub fn trajectory_rng(seed: u64) -> TrajectoryRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of trajectory `traj` at sigma index `sigma_idx` under `master`.
pub fn derive_seed(master: u64, sigma_idx: u64, traj: u64) -> u64 {
    let a = splitmix64(master);
    let b = splitmix64(a ^ sigma_idx.wrapping_mul(0xd6e8_feb8_6659_fd93));
    splitmix64(b ^ traj.wrapping_mul(0xa076_1d64_78bd_642f))
}
