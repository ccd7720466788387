#![allow(dead_code)]

use hctc_core::{ConvCodeSpec, Termination};

pub fn rsc(gens: &[&str], fb: &str, mem: usize, t: Termination) -> ConvCodeSpec {
    ConvCodeSpec::from_octal(1, gens.len(), mem, &[gens], &[fb], true, t).unwrap()
}

pub fn ff(gens: &[&str], mem: usize, t: Termination) -> ConvCodeSpec {
    ConvCodeSpec::from_octal(1, gens.len(), mem, &[gens], &[], false, t).unwrap()
}

/// Rate-2/3 recursive systematic code with memory 2.
pub fn rsc23(t: Termination) -> ConvCodeSpec {
    ConvCodeSpec::from_octal(2, 3, 2, &[&["7", "0", "5"], &["0", "7", "3"]], &["7", "7"], true, t).unwrap()
}

/// Rate-2/3 recursive systematic code with memory 1.
pub fn rsc23_m1(t: Termination) -> ConvCodeSpec {
    ConvCodeSpec::from_octal(2, 3, 1, &[&["3", "0", "1"], &["0", "3", "2"]], &["3", "3"], true, t).unwrap()
}

/// Rate-2/3 feed-forward code with registers of length 1 and 1.
pub fn ff23(t: Termination) -> ConvCodeSpec {
    ConvCodeSpec::from_octal(2, 3, 2, &[&["3", "1", "2"], &["1", "3", "3"]], &[], false, t).unwrap()
}

/// Bits of `m` as a 0/1 vector, least significant first.
pub fn bits(m: u64, n: usize) -> Vec<u8> {
    (0..n).map(|i| ((m >> i) & 1) as u8).collect()
}

pub fn weight(v: &[u8]) -> u32 {
    v.iter().map(|&b| b as u32).sum()
}

/// Every permutation of `0..n` (Heap's algorithm).
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut a: Vec<usize> = (0..n).collect();
    let mut out = vec![a.clone()];
    let mut c = vec![0usize; n];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                a.swap(0, i);
            } else {
                a.swap(c[i], i);
            }
            out.push(a.clone());
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    out
}

pub fn permute(v: &[u8], perm: &[usize]) -> Vec<u8> {
    perm.iter().map(|&p| v[p]).collect()
}
