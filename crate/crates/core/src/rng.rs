//! Counter-based random streams.
//!
//! Every random draw in a simulation is addressed by the tuple
//! `(seed, replica, step, substream)`. A stream is a ChaCha8 generator whose
//! key encodes `(seed, replica)` and whose 64-bit stream id encodes
//! `(step, substream)`, so any stream can be materialised independently of
//! the others. Replicas therefore never share state and an ensemble computed
//! in parallel is bit-identical to the serial one.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Substream used to place the initial particles.
pub const SUBSTREAM_INIT: u8 = 0;
/// Substream for the Brownian increments of one step.
pub const SUBSTREAM_DIFFUSION: u8 = 1;
/// Substream for the pair-marking thresholds of one step.
pub const SUBSTREAM_MARKING: u8 = 2;
/// Substream for the processing order of marked pairs.
pub const SUBSTREAM_ORDER: u8 = 3;

/// Step index used for draws that happen before the first step.
pub const STEP_INIT: u64 = u64::MAX >> 8;

/// Key for a family of streams belonging to one replica.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub seed: u64,
    pub replica: u64,
}

impl StreamKey {
    pub fn new(seed: u64, replica: u64) -> Self {
        Self { seed, replica }
    }

    /// Materialise the stream for `(step, substream)`.
    ///
    /// `step` must be below 2^56; the low byte of the stream id holds the
    /// substream.
    pub fn stream(&self, step: u64, substream: u8) -> ChaCha8Rng {
        debug_assert!(step <= STEP_INIT);
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&self.replica.to_le_bytes());
        // domain tag, keeps these keys apart from other uses of the seed
        key[16..24].copy_from_slice(b"rbm-anni");
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream((step << 8) | u64::from(substream));
        rng
    }
}
