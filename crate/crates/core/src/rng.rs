//! Seed derivation and the generator used for every random draw.
//!
//! All randomness flows from a `u64` master seed. Child seeds are derived by
//! folding a path of integers through the SplitMix64 finalizer, so a
//! replicate's stream depends only on `(master_seed, path)` and not on the
//! order in which replicates are scheduled. Streams are ChaCha8 as
//! implemented by `rand_chacha` 0.3, seeded with `seed_from_u64`; uniform
//! `f64` draws use `rand` 0.8's `Standard` distribution. Both versions are
//! pinned in `Cargo.lock`, which is what makes outputs byte-reproducible.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `master` and a path of stream labels.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stream labels used in seed paths, kept in one place so different
/// experiment stages never collide.
pub mod stream {
    pub const DATASET: u64 = 1;
    pub const RESAMPLE: u64 = 2;
    pub const ESTIMATOR_LAW: u64 = 3;
    pub const GC: u64 = 4;
    pub const ROLE_Q: u64 = 10;
    pub const ROLE_P: u64 = 11;
}
