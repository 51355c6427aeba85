//! Deterministic seed derivation.
//!
//! Every random stream in a run is keyed by the master seed plus a short path
//! of integers (trial index, stream tag, cell index, ...). Streams never share
//! state, so results do not depend on execution order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Stream tags. Kept stable so recorded seeds stay meaningful across versions.
pub mod stream {
    pub const USERS: u64 = 1;
    pub const OCCUPANCY: u64 = 2;
    pub const TRIAL: u64 = 3;
    pub const EPISODE: u64 = 4;
    pub const OFFPEAK_RT: u64 = 10;
    pub const OFFPEAK_FADING: u64 = 11;
    pub const OFFPEAK_SCHEDULER: u64 = 12;
    pub const PEAK_RT: u64 = 20;
    pub const PEAK_FADING: u64 = 21;
    pub const REQUESTS: u64 = 22;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(root: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(root), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn rng_for(root: u64, path: &[u64]) -> SimRng {
    SimRng::seed_from_u64(derive_seed(root, path))
}
