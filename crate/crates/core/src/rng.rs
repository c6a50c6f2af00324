//! Seed derivation and the Gaussian noise generator.
//!
//! All randomness in the crate is drawn from ChaCha8 streams. Stream keys
//! are derived from a root seed plus a tuple of integers (stage, realization,
//! epoch, ...) with a SplitMix64 finalizer, so any work item can
//! regenerate its own stream independently of processing order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// SplitMix64 output finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a stream seed from a root seed and a path of integer keys.
pub fn derive_seed(root: u64, keys: &[u64]) -> u64 {
    keys.iter().fold(splitmix64(root), |acc, &k| splitmix64(acc ^ splitmix64(k)))
}

/// 64-bit FNV-1a, used to fold strings (file names, channel ids) into seeds.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

pub fn stream(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// I.i.d. N(0, std²) samples from the ChaCha8 stream keyed on `stream_seed`.
pub fn gaussian_noise(length: usize, std: f64, stream_seed: u64) -> Vec<f64> {
    let mut rng = stream(stream_seed);
    (0..length)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z * std
        })
        .collect()
}
