//! Deterministic seed derivation.
//!
//! Every randomized operation in this crate takes an explicit `u64` seed.
//! When one seeded run has to spawn several independent random streams
//! (noise trials, random baselines), the child seeds are derived from the
//! master seed with [`derive_seed`] so the whole run is reproducible from a
//! single number, independent of platform or hasher.

/// SplitMix64 finalizer. Stable across platforms and releases.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from a master seed and a list of stream tags
/// (e.g. strategy index, noise-level index, trial index).
pub fn derive_seed(master: u64, tags: &[u64]) -> u64 {
    let mut state = splitmix64(master);
    for &t in tags {
        state = splitmix64(state ^ t.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    }
    state
}
