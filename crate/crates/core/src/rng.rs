//! Seed derivation and uniform draws for campaign scheduling.
//!
//! Per-run seeds come from a splitmix64 chain over the run coordinates, so a
//! single master seed reproduces every run regardless of execution order or
//! thread count. Floats are built from raw generator words; no distribution
//! code from external crates is involved, which keeps draws bit-stable across
//! dependency upgrades.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// splitmix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z ^= z >> 30;
    z = z.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z ^= z >> 27;
    z = z.wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `master` and a list of coordinate words.
///
/// The rule (documented in report headers): starting from the master seed,
/// each coordinate is folded in as `x = mix(x + GOLDEN_GAMMA + word)`, and the
/// final state is mixed once more.
pub fn derive_seed(master: u64, coords: &[u64]) -> u64 {
    let mut x = master;
    for &w in coords {
        x = mix(x.wrapping_add(GOLDEN_GAMMA).wrapping_add(w));
    }
    mix(x.wrapping_add(GOLDEN_GAMMA))
}

/// Seeded stream of uniform draws used by attack schedulers.
#[derive(Debug, Clone)]
pub struct RunRng(ChaCha8Rng);

impl RunRng {
    pub fn new(seed: u64) -> Self {
        RunRng(ChaCha8Rng::seed_from_u64(seed))
    }

    /// Uniform in `[0, 1)` from the top 53 bits of one generator word.
    pub fn next_f64(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }
}
