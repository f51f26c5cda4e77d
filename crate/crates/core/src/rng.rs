//! Deterministic random streams.
//!
//! Every random draw in a session comes from a ChaCha8 stream addressed by
//! `(seed, domain, slot)`. ChaCha is counter based: the 64-bit stream id
//! selects an independent keystream under the same key, so the stream for
//! slot 12 of Bob's side is the same whether the run is serial, parallel,
//! or simulates only Bob.
//!
//! Stream id layout: `domain << 56 | slot`, with `slot < 2^56`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

const SLOT_BITS: u32 = 56;

/// Which part of the experiment a stream feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Domain {
    /// Photon source: pair emission or Alice's state preparation.
    Source = 1,
    /// Everything on Alice's side of the link: channel, filter, basis, detector.
    Alice = 2,
    /// Everything on Bob's side of the link.
    Bob = 3,
    /// Pairwise noise drawn directly in key-element space.
    PairNoise = 4,
    /// Test-sample selection for QBER estimation (slot 0 only).
    Estimation = 5,
}

#[derive(Debug, Clone)]
pub struct Streams {
    base: ChaCha8Rng,
}

impl Streams {
    pub fn new(seed: u64) -> Self {
        Self {
            base: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// The stream for `(domain, slot)`, positioned at its start.
    pub fn stream(&self, domain: Domain, slot: u64) -> SimRng {
        assert!(slot < 1 << SLOT_BITS, "slot index {slot} exceeds 2^56");
        let mut rng = self.base.clone();
        rng.set_stream(((domain as u64) << SLOT_BITS) | slot);
        rng.set_word_pos(0);
        rng
    }
}
