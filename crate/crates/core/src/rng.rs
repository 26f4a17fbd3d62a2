//! Counter-based random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 stream addressed by
//! `(seed, replica, purpose)`. The seed selects the key, the replica selects
//! the ChaCha stream id and the purpose selects a disjoint window of the
//! block counter, so two different triples never share keystream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

/// What a stream is used for. Each purpose owns a 2^66-word window of the
/// counter space of its (seed, replica) stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    /// Latent mixing parameters (the `t` of a de Finetti draw).
    Latent,
    /// Conditionally independent spins given the latent parameters.
    Spins,
    /// Monte Carlo estimators that do not build matrices.
    Mc,
}

impl Purpose {
    fn window(self) -> u128 {
        match self {
            Purpose::Latent => 0,
            Purpose::Spins => 1,
            Purpose::Mc => 2,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Purpose::Latent => "latent",
            Purpose::Spins => "spins",
            Purpose::Mc => "mc",
        }
    }
}

const WINDOW_BITS: u32 = 66;

pub fn seed_stream(seed: u64, replica: u64, purpose: Purpose) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica);
    rng.set_word_pos(purpose.window() << WINDOW_BITS);
    rng
}
