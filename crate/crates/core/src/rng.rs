//! Deterministic seed fan-out and small sampling helpers.
//!
//! Every randomized stage derives its own stream from the single user seed,
//! so runs are reproducible and stages can be reordered or parallelized
//! without perturbing each other.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Derives a child seed from a base seed and a string tag (FNV-1a mix).
pub fn derive_seed(base: u64, tag: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ base.rotate_left(17);
    for b in tag.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h ^ h.rotate_right(29)
}

/// Derives a child seed with an additional numeric discriminant.
pub fn derive_seed_n(base: u64, tag: &str, n: u64) -> u64 {
    let mut h = derive_seed(base, tag);
    for b in n.to_le_bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h ^ h.rotate_right(29)
}

pub fn rng_from(base: u64, tag: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, tag))
}

pub fn rng_from_n(base: u64, tag: &str, n: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed_n(base, tag, n))
}

/// Standard-normal sample (Box-Muller; two uniforms per call).
pub fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let u1: f64 = rng.gen::<f64>();
        if u1 <= f64::MIN_POSITIVE {
            continue;
        }
        let u2: f64 = rng.gen::<f64>();
        return (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
    }
}
