//! Fixtures shared by the benchmarks.

use hctc_core::{ConcatScheme, ConvCodeSpec, Termination};

pub fn rsc75() -> ConvCodeSpec {
    ConvCodeSpec::from_octal(1, 2, 2, &[&["7", "5"]], &["7"], true, Termination::Terminated).unwrap()
}

pub fn ff75() -> ConvCodeSpec {
    ConvCodeSpec::from_octal(1, 2, 2, &[&["7", "5"]], &[], false, Termination::Terminated).unwrap()
}

pub fn rsc23() -> ConvCodeSpec {
    ConvCodeSpec::from_octal(2, 3, 2, &[&["7", "0", "5"], &["0", "7", "3"]], &["7", "7"], true, Termination::Terminated)
        .unwrap()
}

pub fn default_hctc(n1: usize) -> ConcatScheme {
    ConcatScheme::hctc("hctc", rsc75(), ff75(), rsc23(), n1).unwrap()
}

/// Deterministic pseudo-random LLRs in (-4, 4).
pub fn llrs(n: usize, seed: u64) -> Vec<f64> {
    let mut s = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
    (0..n)
        .map(|_| {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s >> 11) as f64 / (1u64 << 53) as f64 * 8.0 - 4.0
        })
        .collect()
}
