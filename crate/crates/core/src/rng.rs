//! Deterministic random streams.
//!
//! Every random quantity is drawn from a ChaCha8 keystream. A Monte Carlo
//! drop is keyed by `drop_seed(base, index)`; inside a drop, user `u` reads
//! stream `u + 1` and the LOS scheduler reads stream 0. Because ChaCha is a
//! counter-mode generator, streams never overlap and each one can be
//! regenerated independently of how work is split across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::C64;

pub type StreamRng = ChaCha8Rng;

pub const SCHEDULER_STREAM: u64 = 0;

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of Monte Carlo drop `index` under base seed `base`.
pub fn drop_seed(base: u64, index: u64) -> u64 {
    mix64(base ^ mix64(index.wrapping_add(1)))
}

/// Stream `stream` of the generator keyed by `seed`.
pub fn stream(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream reserved for user `user` of a drop.
pub fn user_stream(seed: u64, user: usize) -> StreamRng {
    stream(seed, user as u64 + 1)
}

/// Uniform sample in `[lo, hi]`.
pub fn uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    if hi == lo {
        return lo;
    }
    rng.random_range(lo..hi)
}

/// Zero-mean Laplacian sample with the given standard deviation.
pub fn laplacian<R: Rng>(rng: &mut R, std_dev: f64) -> f64 {
    let scale = std_dev / std::f64::consts::SQRT_2;
    let u: f64 = rng.random::<f64>() - 0.5;
    -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

/// Circularly-symmetric complex Gaussian with `E|z|^2 = variance`.
pub fn complex_normal<R: Rng>(rng: &mut R, variance: f64) -> C64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re * s, im * s)
}
