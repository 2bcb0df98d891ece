//! Seed derivation and exact random rationals.
//!
//! All randomness is drawn from ChaCha8 streams keyed by a master seed and
//! a short path of indices (trial, robot, cycle, ...), so any stream can be
//! regenerated without replaying the others.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::rat::Rat;

pub type SimRng = ChaCha8Rng;

/// Resolution of [`unit_open`]: draws are multiples of `2^-UNIT_BITS`.
pub const UNIT_BITS: u32 = 53;

/// Resolution of [`uniform_closed`] and [`uniform_half_open`].
pub const GRID_BITS: u32 = 32;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds `path` into `master`, yielding an independent 64-bit seed.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master), |acc, &p| splitmix64(acc ^ splitmix64(p.wrapping_add(0x5851_f42d_4c95_7f2d))))
}

pub fn stream(master: u64, path: &[u64]) -> SimRng {
    SimRng::seed_from_u64(derive_seed(master, path))
}

/// Uniform draw from the open interval (0, 1): `k / 2^53` with
/// `k` uniform in `[1, 2^53 - 1]`.
pub fn unit_open<R: Rng + ?Sized>(rng: &mut R) -> Rat {
    let k = rng.random_range(1..(1u64 << UNIT_BITS));
    Rat::from_int(k as i64) * Rat::pow2(-(UNIT_BITS as i32))
}

/// Uniform grid draw from `[lo, hi]`.
pub fn uniform_closed<R: Rng + ?Sized>(rng: &mut R, lo: &Rat, hi: &Rat) -> Rat {
    let k = rng.random_range(0..=(1u64 << GRID_BITS));
    lo + &((hi - lo) * Rat::from_int(k as i64) * Rat::pow2(-(GRID_BITS as i32)))
}

/// Uniform grid draw from `(lo, hi]`.
pub fn uniform_half_open<R: Rng + ?Sized>(rng: &mut R, lo: &Rat, hi: &Rat) -> Rat {
    let k = rng.random_range(1..=(1u64 << GRID_BITS));
    lo + &((hi - lo) * Rat::from_int(k as i64) * Rat::pow2(-(GRID_BITS as i32)))
}
