//! Seed derivation and complex Gaussian draws.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Human-readable statement of how per-trial seeds are derived, echoed into
/// result metadata.
pub const SEED_RULE: &str = "trial_seed = splitmix64(base_seed + splitmix64(trial_index + 0x9E3779B97F4A7C15)); \
instance rng = ChaCha8Rng::seed_from_u64(trial_seed); channel entries drawn row-major (antenna, user), \
re then im, each N(0, 1/2)";

pub type InstanceRng = ChaCha8Rng;

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for trial `trial` of an experiment with base seed `base`. Depends only
/// on the pair, never on scheduling.
pub fn trial_seed(base: u64, trial: u64) -> u64 {
    splitmix64(base.wrapping_add(splitmix64(trial.wrapping_add(0x9E37_79B9_7F4A_7C15))))
}

/// Circularly-symmetric complex Gaussian with unit variance.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}
