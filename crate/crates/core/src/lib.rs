//! Camera-based pulse (remote-PPG) toolkit: frame-difference preprocessing,
//! a from-scratch regression CNN, POS/CHROM extractors, a synthetic skin-video
//! generator and a cross-validated experiment harness.

pub mod cli;
pub mod error;
pub mod extractors;
pub mod frames;
pub mod harness;
pub mod io;
pub mod nnkit;
pub mod sigproc;
pub mod synth;

pub use error::{Error, Result};

/// splitmix64 finaliser over a seed and two stream words.
pub(crate) fn mix_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed
        .wrapping_add(a.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(b.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
