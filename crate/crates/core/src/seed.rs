//! Counter-based seeding. Every random draw in a trial comes from
//! `(master_seed, trial_index, attempt)` mixed into a 64-bit trial seed,
//! then split into independent ChaCha streams by purpose.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Purpose-specific stream identifiers within one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Geometry = 1,
    Channel = 2,
    DataSymbols = 3,
    PilotImpairment = 4,
    DataImpairment = 5,
    GradientSubset = 6,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for one trial attempt. Independent of scheduling order.
pub fn trial_seed(master: u64, trial_index: u64, attempt: u32) -> u64 {
    let a = splitmix64(master);
    let b = splitmix64(a ^ trial_index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    splitmix64(b ^ (attempt as u64).wrapping_mul(0x8CB9_2BA7_2F3D_8DD7))
}

pub fn stream_rng(trial_seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
    rng.set_stream(stream as u64);
    rng
}

/// Circularly-symmetric complex normal sample with the given variance.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * s, im * s)
}
