//! Seeded randomness. Every random input derives from an explicit `u64`
//! seed through ChaCha8 (`rand_chacha`, `seed_from_u64`), so runs are
//! reproducible across hosts and thread counts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Identifier recorded in reports and manifests.
pub const PRNG_ALGORITHM: &str = "chacha8/rand_chacha-0.9/seed_from_u64";

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A point drawn uniformly from the open simplex `{x_i > 0, Σ x_i = 1}`,
/// via normalized standard exponentials.
pub fn uniform_simplex<R: Rng>(rng: &mut R, d: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..d)
        .map(|_| {
            // (0, 1]: never takes the log of zero
            let u: f64 = 1.0 - rng.random::<f64>();
            -u.ln()
        })
        .collect();
    let total: f64 = e.iter().sum();
    e.into_iter().map(|x| x / total).collect()
}

/// Uniform point in `[0, 1)`.
pub fn unit_point<R: Rng>(rng: &mut R) -> f64 {
    rng.random::<f64>()
}
