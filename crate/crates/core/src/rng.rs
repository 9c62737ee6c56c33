//! Counter-based random substreams.
//!
//! Every random draw in the simulator comes from a [`RandomSource`] keyed by a
//! 64-bit seed and a 64-bit stream id. The seed becomes the ChaCha key and the
//! stream id selects an independent ChaCha stream, so a round's draws depend
//! only on `(seed, stream)` and never on the order in which rounds execute.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Which party consumes a per-round substream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Role {
    Eve = 0,
    Bob = 1,
    Alice = 2,
    Aux = 3,
}

/// Session-level lanes live above every round lane.
const SESSION_LANE: u64 = 1 << 63;

/// Stream id reserved for Step-6 check sampling.
pub const LANE_SIFT_SAMPLING: u64 = SESSION_LANE | 1;
/// Stream id reserved for attack construction (random presets).
pub const LANE_ATTACK_SETUP: u64 = SESSION_LANE | 2;

#[derive(Debug, Clone)]
pub struct RandomSource {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl RandomSource {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { seed, stream, rng }
    }

    /// Substream for one party within one protocol round.
    pub fn for_round(seed: u64, round: u64, role: Role) -> Self {
        debug_assert!(round < (1 << 61), "round index overflows lane layout");
        Self::new(seed, (round << 2) | role as u64)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn coin(&mut self) -> bool {
        self.rng.random_bool(0.5)
    }

    /// Uniform index in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    /// Draws an index from a discrete distribution given by `weights`.
    ///
    /// Weights need not be normalized. Floating-point shortfall at the top of
    /// the cumulative sum lands on the last index with positive weight.
    pub fn categorical(&mut self, weights: &[f64]) -> usize {
        let total: f64 = weights.iter().sum();
        let target = self.uniform() * total;
        let mut acc = 0.0;
        let mut last_positive = 0;
        for (i, &w) in weights.iter().enumerate() {
            if w <= 0.0 {
                continue;
            }
            last_positive = i;
            acc += w;
            if target < acc {
                return i;
            }
        }
        last_positive
    }
}

impl RngCore for RandomSource {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}
