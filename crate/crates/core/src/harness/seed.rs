// SPDX-License-Identifier: MIT OR Apache-2.0

//! Derivation of independent stream seeds from one master seed.
//!
//! `mix(master, index)` offsets the master seed by `(index + 1)` times the
//! 64-bit golden-ratio constant `0x9E3779B97F4A7C15` (wrapping) and passes
//! the sum through the SplitMix64 finalizer:
//!
//! ```text
//! z = master + (index + 1) * 0x9E3779B97F4A7C15
//! z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//! z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//! z =  z ^ (z >> 31)
//! ```
//!
//! Each derived seed initializes its own ChaCha8 stream, so replications can
//! run on any thread in any order and still produce the same bytes.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// Seed of stream `index` under `master`.
pub fn mix(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
