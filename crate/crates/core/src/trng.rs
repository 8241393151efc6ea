//! Random challenge source standing in for the memristive TRNG.
//!
//! The physical generator is used by the system only as a uniform challenge
//! source, so the behavioral stand-in is a counter-based cryptographic
//! PRNG in seeded mode and OS entropy in live mode. Seeded mode is fully
//! replayable and is the only mode used by tests and campaigns.

use rand::RngCore;
use rand_chacha::ChaCha8Rng;

use crate::bits::Bits;
use crate::seed::{self, tags};

/// A replayable or entropy-backed bit source.
#[derive(Debug, Clone)]
pub enum RandomSource {
    Seeded { rng: ChaCha8Rng, position: u64 },
    OsEntropy { position: u64 },
}

impl RandomSource {
    pub fn seeded(seed: u64) -> Self {
        RandomSource::Seeded {
            rng: seed::derive_rng(seed, &[tags::TRNG]),
            position: 0,
        }
    }

    pub fn os_entropy() -> Self {
        RandomSource::OsEntropy { position: 0 }
    }

    /// Bits drawn so far.
    pub fn position(&self) -> u64 {
        match self {
            RandomSource::Seeded { position, .. } | RandomSource::OsEntropy { position } => {
                *position
            }
        }
    }

    /// Next `n` bits. In seeded mode the output is a function of
    /// (seed, stream position) only.
    pub fn next_bits(&mut self, n: usize) -> Bits {
        assert!(n >= 1, "next_bits requires n >= 1");
        let mut out = Vec::with_capacity(n);
        let mut word = 0u64;
        let mut have = 0usize;
        for _ in 0..n {
            if have == 0 {
                word = match self {
                    RandomSource::Seeded { rng, .. } => rng.next_u64(),
                    RandomSource::OsEntropy { .. } => rand::rngs::OsRng.next_u64(),
                };
                have = 64;
            }
            out.push(word & 1 == 1);
            word >>= 1;
            have -= 1;
        }
        match self {
            RandomSource::Seeded { position, .. } | RandomSource::OsEntropy { position } => {
                *position += n as u64;
            }
        }
        Bits::new(out)
    }
}
