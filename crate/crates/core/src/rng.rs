//! Counter-based random streams.
//!
//! Every random quantity is drawn from a ChaCha stream keyed by the run seed
//! and a (domain, index, index) triple, so the value of any draw does not
//! depend on evaluation order or on how work is split across threads.

use crate::C64;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

/// What a stream is used for. Distinct domains never share a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Domain {
    Pilots = 1,
    Rcs = 2,
    Noise = 3,
    Scene = 4,
    Twist = 5,
    Calibration = 6,
    Test = 7,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of item `index` derived from a base seed.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    splitmix64(base ^ splitmix64(index ^ 0x5DEE_CE66_D1CE_4E5B))
}

/// Independent stream for `(seed, domain, a, b)`.
pub fn stream(seed: u64, domain: Domain, a: u64, b: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(splitmix64(seed ^ splitmix64(domain as u64)));
    let id = splitmix64(splitmix64(a).wrapping_add(b.rotate_left(32)) ^ (domain as u64) << 56);
    rng.set_stream(id);
    rng
}

/// Circularly-symmetric complex Gaussian sample with variance `var`.
pub fn complex_gaussian<R: rand::Rng + ?Sized>(rng: &mut R, var: f64) -> C64 {
    let s = (0.5 * var).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(s * re, s * im)
}
