//! Seed derivation for reproducible experiment repeats.
//!
//! A master seed spawns per-run and per-stage seeds through splitmix64,
//! so that repeats are statistically independent yet fully determined by
//! the master seed.

/// One splitmix64 scramble step.
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive the seed for sub-stream `stream` of `master`.
pub fn derive(master: u64, stream: u64) -> u64 {
    splitmix64(master ^ splitmix64(stream))
}
