//! Deterministic RNG streams.
//!
//! Every random draw in the simulator comes from a [`ChaCha8Rng`] keyed by the
//! experiment seed plus a small tuple of identifiers (client, round, purpose),
//! so parallel and serial schedules see the same numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Purposes keep streams for different consumers apart even when the
/// (client, round) pair coincides.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Stream {
    ModelInit = 1,
    Defense = 2,
    AttackInit = 3,
    Synthesis = 4,
    Audit = 5,
    Misc = 6,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent stream from `seed` and a list of identifiers.
pub fn derive(seed: u64, stream: Stream, ids: &[u64]) -> SimRng {
    let mut h = splitmix64(seed ^ (stream as u64).rotate_left(32));
    for &id in ids {
        h = splitmix64(h ^ id);
    }
    ChaCha8Rng::seed_from_u64(h)
}
