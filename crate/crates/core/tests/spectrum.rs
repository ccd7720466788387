mod common;

use common::*;
use hctc_core::spectrum::{
    brute_force_iowc, convolve, enumerate_error_events, events_to_block_iowc, exact_block_iowc, EventLimits, WeightPoly,
    DEFAULT_CELL_BUDGET,
};
use hctc_core::{ConvCodeSpec, Termination, Trellis};
use num_bigint::BigUint;
use proptest::prelude::*;
use std::collections::BTreeMap;

fn check_exact_vs_brute(t: &Trellis, steps: usize, term: Termination) {
    let exact = exact_block_iowc(t, steps, term, None, DEFAULT_CELL_BUDGET).unwrap();
    let brute = brute_force_iowc(t, steps, term).unwrap();
    assert_eq!(exact.cells(), brute.cells(), "steps={steps} term={term:?}");
}

#[test]
fn exact_equals_brute_force_for_reference_codes() {
    let t = Termination::Terminated;
    let codes: Vec<(ConvCodeSpec, usize)> = vec![
        (ConvCodeSpec::identity(), 10),
        (ff(&["7", "5"], 2, t), 10),
        (ff(&["23", "35"], 4, t), 10),
        (rsc(&["23", "35"], "23", 4, t), 10),
        (rsc23(t), 8),
        (ff23(t), 8),
    ];
    for (spec, steps) in codes {
        let tr = spec.build_trellis().unwrap();
        for term in [Termination::Terminated, Termination::Truncated] {
            check_exact_vs_brute(&tr, steps, term);
        }
    }
}

/// Ordered j-tuples of events keyed by (w, h, total length).
fn tuples(events: &BTreeMap<(u32, u32, usize), BigUint>, j: u32) -> BTreeMap<(u32, u32, usize), BigUint> {
    let mut acc: BTreeMap<(u32, u32, usize), BigUint> = BTreeMap::new();
    acc.insert((0, 0, 0), BigUint::from(1u32));
    for _ in 0..j {
        let mut next = BTreeMap::new();
        for (&(w, h, l), c) in &acc {
            for (&(w2, h2, l2), c2) in events {
                *next.entry((w + w2, h + h2, l + l2)).or_insert_with(BigUint::default) += c * c2;
            }
        }
        acc = next;
    }
    acc
}

fn choose(n: i64, k: i64) -> BigUint {
    if n < k || k < 0 {
        return BigUint::default();
    }
    hctc_core::numeric::binomial(n as u64, k as u64)
}

#[test]
fn length_aware_placement_reproduces_exact_counts() {
    // j ordered events of total length L fit into the N + nu terminated steps
    // in C(N + nu - L + j, j) ways; this must reproduce the exact DP for a
    // feed-forward code.
    let tr = ff(&["7", "5"], 2, Termination::Terminated).build_trellis().unwrap();
    let steps = 8;
    let limits = EventLimits {
        w_max: 8,
        h_max: 30,
        len_max: 10,
    };
    let ev = enumerate_error_events(&tr, limits);
    let exact = exact_block_iowc(&tr, steps, Termination::Terminated, None, DEFAULT_CELL_BUDGET).unwrap();
    let mut oracle = WeightPoly::new();
    oracle.insert((0, 0), BigUint::from(1u32));
    for j in 1..=4u32 {
        for ((w, h, l), c) in tuples(&ev.table, j) {
            let ways = choose((steps + 2) as i64 - l as i64 + j as i64, j as i64);
            if ways > BigUint::default() {
                *oracle.entry((w, h)).or_default() += c * ways;
            }
        }
    }
    oracle.retain(|_, v| *v > BigUint::default());
    assert_eq!(&oracle, exact.cells());
}

#[test]
fn event_approximation_overcounts_and_improves_with_n() {
    let tr = ff(&["7", "5"], 2, Termination::Terminated).build_trellis().unwrap();
    let limits = EventLimits {
        w_max: 4,
        h_max: 14,
        len_max: 64,
    };
    let ev = enumerate_error_events(&tr, limits);
    let mut prev_err = f64::INFINITY;
    for steps in [8usize, 16, 32, 64] {
        let approx = events_to_block_iowc(&ev, steps, 4).unwrap();
        let exact = exact_block_iowc(&tr, steps, Termination::Terminated, Some((4, 14)), DEFAULT_CELL_BUDGET).unwrap();
        let mut worst = 0.0f64;
        for (&(w, h), c) in exact.cells() {
            let a = approx.get(w, h);
            assert!(&a >= c, "approximation below exact at ({w},{h}), N={steps}");
            let (a, c) = (a.to_string().parse::<f64>().unwrap(), c.to_string().parse::<f64>().unwrap());
            worst = worst.max((a - c) / c);
        }
        assert!(worst < prev_err, "relative error did not shrink at N={steps}");
        prev_err = worst;
    }
    // Known short-frame discrepancy: (w=2, h=10) at N=8 is 28 against 15.
    let approx = events_to_block_iowc(&ev, 8, 4).unwrap();
    let exact = exact_block_iowc(&tr, 8, Termination::Terminated, None, DEFAULT_CELL_BUDGET).unwrap();
    assert_eq!(approx.get(2, 10), BigUint::from(28u32));
    assert_eq!(exact.get(2, 10), BigUint::from(15u32));
}

#[test]
fn recursive_code_events_have_even_weight_or_more() {
    let tr = rsc(&["7", "5"], "7", 2, Termination::Terminated).build_trellis().unwrap();
    let ev = enumerate_error_events(
        &tr,
        EventLimits {
            w_max: 6,
            h_max: 20,
            len_max: 64,
        },
    );
    assert_eq!(ev.min_input_weight(), Some(2));
    assert_eq!(ev.min_output_weight(), Some(5));
}

#[test]
fn convolution_with_unit_is_identity() {
    let mut a = WeightPoly::new();
    a.insert((1, 5), BigUint::from(1u32));
    a.insert((2, 6), BigUint::from(3u32));
    let mut unit = WeightPoly::new();
    unit.insert((0, 0), BigUint::from(1u32));
    assert_eq!(convolve(&a, &unit, 10, 10), a);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn truncation_is_monotone(w_small in 0u32..6, dw in 0u32..4, h_small in 0u32..14, dh in 0u32..6, steps in 4usize..12) {
        let tr = ff(&["7", "5"], 2, Termination::Terminated).build_trellis().unwrap();
        let small = exact_block_iowc(&tr, steps, Termination::Terminated, Some((w_small, h_small)), DEFAULT_CELL_BUDGET).unwrap();
        let large = exact_block_iowc(&tr, steps, Termination::Terminated, Some((w_small + dw, h_small + dh)), DEFAULT_CELL_BUDGET).unwrap();
        for (&(w, h), c) in large.cells() {
            if w <= w_small && h <= h_small {
                prop_assert_eq!(&small.get(w, h), c);
            }
        }
        for (&(w, h), c) in small.cells() {
            prop_assert!(&large.get(w, h) >= c);
        }
    }
}
