//! Random streams used by the simulator.
//!
//! Every stochastic choice in the model goes through [`RandomSource`], so the
//! order in which a trajectory consumes randomness is fixed:
//!
//! 1. initial spins, one [`RandomSource::coin`] per node in index order;
//! 2. per pair interaction: [`RandomSource::index`] for the first node, then
//!    [`RandomSource::unit`] for the neighbor choice, then (only when the pair
//!    deals) two coins, first node first.
//!
//! The production generator is xoshiro256++ seeded through SplitMix64. Replica
//! seeds are derived with [`derive_seed`].

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output finalizer.
#[inline]
pub fn splitmix64_mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replica `replica` under master seed `seed`.
///
/// This is the `(replica + 1)`-th output of a SplitMix64 stream started at
/// `seed`, so it can be reproduced in any language with 64-bit wrapping
/// arithmetic.
pub fn derive_seed(seed: u64, replica: u64) -> u64 {
    splitmix64_mix(seed.wrapping_add(replica.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

/// Source of the three kinds of draws the model makes.
///
/// Only `next_u64` is required. Test stubs override the higher level draws to
/// script a trajectory.
pub trait RandomSource {
    fn next_u64(&mut self) -> u64;

    /// Uniform integer in `0..n` (Lemire's multiply-and-reject). `n` must be
    /// nonzero.
    fn index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        let range = n as u64;
        let mut wide = u128::from(self.next_u64()) * u128::from(range);
        let mut low = wide as u64;
        if low < range {
            let threshold = range.wrapping_neg() % range;
            while low < threshold {
                wide = u128::from(self.next_u64()) * u128::from(range);
                low = wide as u64;
            }
        }
        (wide >> 64) as usize
    }

    /// Uniform real in `[0, 1)` with 53 bits of resolution.
    fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Fair coin from the top bit of one output. `true` maps to a buyer.
    fn coin(&mut self) -> bool {
        self.next_u64() >> 63 == 1
    }
}

/// The project-wide generator: xoshiro256++ with SplitMix64 state expansion.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimRng(Xoshiro256PlusPlus);

impl SimRng {
    pub fn from_seed(seed: u64) -> Self {
        Self(Xoshiro256PlusPlus::seed_from_u64(seed))
    }
}

impl RandomSource for SimRng {
    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }
}

impl<R: RandomSource + ?Sized> RandomSource for &mut R {
    fn next_u64(&mut self) -> u64 {
        (**self).next_u64()
    }
    fn index(&mut self, n: usize) -> usize {
        (**self).index(n)
    }
    fn unit(&mut self) -> f64 {
        (**self).unit()
    }
    fn coin(&mut self) -> bool {
        (**self).coin()
    }
}
