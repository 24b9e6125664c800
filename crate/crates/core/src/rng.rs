//! Seed derivation. Every agent owns independent streams derived from the
//! master seed, the agent id and the purpose of the stream, so results do not
//! depend on evaluation order and adding or removing Byzantine agents does not
//! disturb the draws of reliable ones.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type SimRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Init = 1,
    Gradient = 2,
    Noise = 3,
    Topology = 4,
    Attack = 5,
    Estimation = 6,
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, agent: u64, stream: Stream) -> u64 {
    mix64(mix64(mix64(master) ^ agent.wrapping_mul(0xA24B_AED4_963E_E407)) ^ stream as u64)
}

pub fn stream_rng(master: u64, agent: u64, stream: Stream) -> SimRng {
    SimRng::seed_from_u64(derive_seed(master, agent, stream))
}

#[inline]
pub fn standard_normal<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

#[inline]
pub fn normal<R: RngCore + ?Sized>(rng: &mut R, mean: f64, variance: f64) -> f64 {
    if variance == 0.0 {
        return mean;
    }
    mean + crate::math::sqrt(variance) * standard_normal(rng)
}

#[inline]
pub fn uniform<R: RngCore + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}
