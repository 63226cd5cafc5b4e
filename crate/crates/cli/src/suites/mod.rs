//! The checks behind each subcommand, free of file I/O.

pub mod algebra;
pub mod convergence;
pub mod identities;
pub mod operators;
pub mod solve;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Fitted convergence order required of second-order quantities.
pub const ORDER_THRESHOLD: f64 = 1.9;

/// Independent stream per check, so adding a check leaves the others'
/// draws unchanged.
pub fn rng_for(seed: u64, label: &str) -> ChaCha8Rng {
    // FNV-1a over the label.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    ChaCha8Rng::seed_from_u64(seed ^ h)
}
