//! Seed derivation.
//!
//! Every random stream in the workbench is a [`ChaCha8Rng`] seeded from a
//! 64-bit value. Experiments derive child seeds from one master seed by
//! hashing a path of integers, e.g. `derive(master, &[STUDY, instance, trial])`,
//! so the stream a trial sees does not depend on scheduling or on how many
//! other trials run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Path tags for the experiment families.
pub mod tag {
    pub const INIT: u64 = 0x1001;
    pub const SHOTS: u64 = 0x1002;
    pub const SHIFT: u64 = 0x1003;
    pub const BLUE_SCAN: u64 = 0x2001;
    pub const GRID: u64 = 0x2002;
    pub const SCALING: u64 = 0x2003;
    pub const STUDY_GRAPH: u64 = 0x2004;
    pub const STUDY_QEMC: u64 = 0x2005;
    pub const STUDY_GW: u64 = 0x2006;
    pub const GW_SOLVE: u64 = 0x3001;
    pub const GW_ROUND: u64 = 0x3002;
    pub const GW_TRIAL: u64 = 0x3003;
    pub const RANDOM_STAR: u64 = 0x3004;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `master` and a path of indices.
pub fn derive(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derive_is_path_sensitive() {
        assert_eq!(derive(7, &[1, 2]), derive(7, &[1, 2]));
        assert_ne!(derive(7, &[1, 2]), derive(7, &[2, 1]));
        assert_ne!(derive(7, &[1]), derive(8, &[1]));
        assert_ne!(derive(7, &[]), derive(7, &[0]));
    }
}
