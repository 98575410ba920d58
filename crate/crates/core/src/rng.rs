//! Seeded random streams.
//!
//! Every stochastic call site draws from its own ChaCha stream keyed by
//! `(master seed, purpose tag, round, client)`. Streams never depend on which
//! thread runs a client or on the order clients finish.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Purpose tags for the stream key. Adding a variant never perturbs the
/// streams of existing ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    TaskDefinition,
    BaseSamples,
    Partition,
    Split,
    Corruption,
    Subsample,
    ModelInit,
    GaussianInit,
    Participation,
    LocalShuffle,
    Folds,
    FineTune,
    LocalInit,
    Theory,
    Custom(u64),
}

impl Purpose {
    fn code(self) -> u64 {
        match self {
            Purpose::TaskDefinition => 1,
            Purpose::BaseSamples => 2,
            Purpose::Partition => 3,
            Purpose::Split => 4,
            Purpose::Corruption => 5,
            Purpose::Subsample => 6,
            Purpose::ModelInit => 7,
            Purpose::GaussianInit => 8,
            Purpose::Participation => 9,
            Purpose::LocalShuffle => 10,
            Purpose::Folds => 11,
            Purpose::FineTune => 12,
            Purpose::LocalInit => 13,
            Purpose::Theory => 14,
            Purpose::Custom(c) => 0x1000 + c,
        }
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Opens the stream for `(seed, purpose, round, client)`.
pub fn stream(seed: u64, purpose: Purpose, round: u64, client: u64) -> SimRng {
    let mut state = seed;
    let mut acc = splitmix64(&mut state);
    for word in [purpose.code(), round, client] {
        state ^= word.wrapping_mul(0xD6E8_FEB8_6659_FD93);
        acc ^= splitmix64(&mut state);
    }
    let mut key = [0u8; 32];
    let mut s = acc;
    for chunk in key.chunks_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut s).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}
