//! Seeded random streams.
//!
//! Every stochastic routine takes an explicit `&mut Stream`. Seeds are
//! expanded with SplitMix64 into xoshiro256** state, so a seed fully
//! determines a run within one build.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256StarStar;

pub type Stream = Xoshiro256StarStar;

/// Domain tags used to split one experiment seed into independent streams.
const ENV_TAG: u64 = 0x656e_7669_726f_6e6d;
const AGENT_TAG: u64 = 0x6167_656e_742d_7374;

pub fn stream(seed: u64) -> Stream {
    Xoshiro256StarStar::seed_from_u64(seed)
}

/// Stream used to generate environment phases and switch times.
pub fn env_stream(seed: u64) -> Stream {
    stream(seed ^ ENV_TAG)
}

/// Stream consumed by the learner (initial states, actions, transitions, arm draws).
pub fn agent_stream(seed: u64) -> Stream {
    stream(seed ^ AGENT_TAG)
}
