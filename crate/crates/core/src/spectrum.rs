//! Input-output weight coefficients (IOWC) of the block codes obtained by
//! running a convolutional code over a finite frame.
//!
//! Two routes are provided: [`exact_block_iowc`] runs a forward dynamic
//! programme over the trellis and is exact, while [`enumerate_error_events`]
//! followed by [`events_to_block_iowc`] builds the large-frame approximation
//! from single error events placed in `C(N, j)` ways.

use crate::error::{Error, Result};
use crate::numeric::binomial;
use crate::trellis::{Termination, Trellis};
use num_bigint::BigUint;
use num_traits::{One, Zero};
use std::collections::{BTreeMap, HashMap};
use std::io::{self, Write};

/// Sparse bivariate polynomial in (input weight, output weight).
pub type WeightPoly = BTreeMap<(u32, u32), BigUint>;

/// Limits for the error-event search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EventLimits {
    pub w_max: u32,
    pub h_max: u32,
    pub len_max: usize,
}

/// Exact counts of simple error events keyed by `(w, h, length)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EventSpectrum {
    pub table: BTreeMap<(u32, u32, usize), BigUint>,
    pub limits: EventLimits,
    /// Paths within the weight limits were still open at `len_max`.
    pub length_limited: bool,
    pub memory: usize,
    pub k_in: usize,
}

impl EventSpectrum {
    /// Single-event enumerator with lengths summed out.
    pub fn enumerator(&self) -> WeightPoly {
        let mut out = WeightPoly::new();
        for (&(w, h, _), c) in &self.table {
            *out.entry((w, h)).or_default() += c;
        }
        out
    }

    /// Smallest input weight of any event, if one was found.
    pub fn min_input_weight(&self) -> Option<u32> {
        self.table.keys().map(|k| k.0).min()
    }

    pub fn min_output_weight(&self) -> Option<u32> {
        self.table.keys().map(|k| k.1).min()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }
}

/// Truncation applied when a spectrum was built.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Truncation {
    pub w_max: u32,
    pub h_max: u32,
    pub j_max: Option<u32>,
}

/// Which route produced a [`WeightSpectrum`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumSource {
    Exact,
    ErrorEvents,
}

/// Block-code IOWC `A_{w,h}`, optionally stratified by event count `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSpectrum {
    cells: WeightPoly,
    by_events: Option<BTreeMap<(u32, u32, u32), BigUint>>,
    steps: usize,
    k_in: usize,
    truncation: Truncation,
    source: SpectrumSource,
}

impl WeightSpectrum {
    /// Build from explicit cells; used for synthetic spectra and tests.
    pub fn from_cells(cells: WeightPoly, steps: usize, k_in: usize, truncation: Truncation) -> Self {
        Self {
            cells,
            by_events: None,
            steps,
            k_in,
            truncation,
            source: SpectrumSource::Exact,
        }
    }

    pub fn get(&self, w: u32, h: u32) -> BigUint {
        self.cells.get(&(w, h)).cloned().unwrap_or_default()
    }

    /// Unplaced count `A_{w,h,j}` of ordered j-tuples of events.
    pub fn get_by_events(&self, w: u32, h: u32, j: u32) -> Option<BigUint> {
        self.by_events
            .as_ref()
            .map(|t| t.get(&(w, h, j)).cloned().unwrap_or_default())
    }

    pub fn cells(&self) -> &WeightPoly {
        &self.cells
    }

    pub fn by_events(&self) -> Option<&BTreeMap<(u32, u32, u32), BigUint>> {
        self.by_events.as_ref()
    }

    /// Trellis steps of the equivalent block code.
    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Information bits of the equivalent block code.
    pub fn info_len(&self) -> usize {
        self.steps * self.k_in
    }

    pub fn truncation(&self) -> Truncation {
        self.truncation
    }

    pub fn source(&self) -> SpectrumSource {
        self.source
    }

    /// Nonzero cells with `w > 0`.
    pub fn nonzero(&self) -> impl Iterator<Item = (u32, u32, &BigUint)> {
        self.cells
            .iter()
            .filter(|(&(w, _), c)| w > 0 && !c.is_zero())
            .map(|(&(w, h), c)| (w, h, c))
    }

    /// Minimum output weight over nonzero cells with `w > 0`.
    pub fn min_output_weight(&self) -> Option<u32> {
        self.nonzero().map(|(_, h, _)| h).min()
    }

    pub fn min_input_weight(&self) -> Option<u32> {
        self.nonzero().map(|(w, _, _)| w).min()
    }

    /// Sum over h of `A_{w,h}`.
    pub fn row_total(&self, w: u32) -> BigUint {
        self.cells
            .range((w, 0)..=(w, u32::MAX))
            .map(|(_, c)| c)
            .sum()
    }

    /// CSV with columns `w,h,j,count`. Stratified spectra emit one row per
    /// `(w, h, j)` holding `A_{w,h,j}`; others leave `j` empty.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "w,h,j,count")?;
        match &self.by_events {
            Some(t) => {
                for (&(w, h, j), c) in t {
                    writeln!(out, "{w},{h},{j},{c}")?;
                }
            }
            None => {
                for (&(w, h), c) in &self.cells {
                    writeln!(out, "{w},{h},,{c}")?;
                }
            }
        }
        Ok(())
    }
}

/// Exhaustive enumeration of simple error events within `limits`.
pub fn enumerate_error_events(trellis: &Trellis, limits: EventLimits) -> EventSpectrum {
    let ns = trellis.num_states();
    let nb = trellis.num_branches();
    let mut table: BTreeMap<(u32, u32, usize), BigUint> = BTreeMap::new();
    let mut live: Vec<HashMap<(u32, u32), BigUint>> = vec![HashMap::new(); ns];

    if limits.len_max >= 1 {
        for u in 1..nb {
            let w = u.count_ones();
            let h = trellis.output(0, u).count_ones();
            if w > limits.w_max || h > limits.h_max {
                continue;
            }
            let next = trellis.next_state(0, u);
            if next == 0 {
                *table.entry((w, h, 1)).or_default() += 1u32;
            } else {
                *live[next].entry((w, h)).or_default() += 1u32;
            }
        }
    }
    let mut len = 1;
    while len < limits.len_max && live.iter().any(|m| !m.is_empty()) {
        len += 1;
        let mut fresh: Vec<HashMap<(u32, u32), BigUint>> = vec![HashMap::new(); ns];
        for (s, paths) in live.iter().enumerate() {
            for (&(w, h), count) in paths {
                for u in 0..nb {
                    let w2 = w + u.count_ones();
                    let h2 = h + trellis.output(s, u).count_ones();
                    if w2 > limits.w_max || h2 > limits.h_max {
                        continue;
                    }
                    let next = trellis.next_state(s, u);
                    if next == 0 {
                        *table.entry((w2, h2, len)).or_default() += count;
                    } else {
                        *fresh[next].entry((w2, h2)).or_default() += count;
                    }
                }
            }
        }
        live = fresh;
    }
    EventSpectrum {
        table,
        limits,
        length_limited: live.iter().any(|m| !m.is_empty()),
        memory: trellis.memory(),
        k_in: trellis.k_in(),
    }
}

/// Truncated product of two weight polynomials.
pub fn convolve(a: &WeightPoly, b: &WeightPoly, w_max: u32, h_max: u32) -> WeightPoly {
    let mut out = WeightPoly::new();
    for (&(wa, ha), ca) in a {
        for (&(wb, hb), cb) in b {
            let (w, h) = (wa + wb, ha + hb);
            if w <= w_max && h <= h_max {
                *out.entry((w, h)).or_default() += ca * cb;
            }
        }
    }
    out
}

/// Large-frame IOWC approximation: `A_{w,h} = sum_{j=1}^{j_max} C(N, j) A_{w,h,j}`
/// where `A_{w,h,j}` counts ordered j-tuples of error events with total input
/// weight w and output weight h, and `N` is the number of trellis steps.
pub fn events_to_block_iowc(events: &EventSpectrum, n_steps: usize, j_max: u32) -> Result<WeightSpectrum> {
    if j_max < 1 {
        return Err(Error::Input("j_max must be at least 1".into()));
    }
    if n_steps < 10 * events.memory {
        log::warn!(
            "frame of {n_steps} steps is short for memory {}; event approximation is coarse",
            events.memory
        );
    }
    let (w_max, h_max) = (events.limits.w_max, events.limits.h_max);
    let single = events.enumerator();
    let mut cells = WeightPoly::new();
    cells.insert((0, 0), BigUint::one());
    let mut stratified = BTreeMap::new();
    let mut power = single.clone();
    for j in 1..=j_max {
        if j > 1 {
            power = convolve(&power, &single, w_max, h_max);
        }
        if power.is_empty() || j as usize > n_steps {
            break;
        }
        let placements = binomial(n_steps as u64, j as u64);
        for (&(w, h), c) in &power {
            if c.is_zero() {
                continue;
            }
            stratified.insert((w, h, j), c.clone());
            *cells.entry((w, h)).or_default() += c * &placements;
        }
    }
    Ok(WeightSpectrum {
        cells,
        by_events: Some(stratified),
        steps: n_steps,
        k_in: events.k_in,
        truncation: Truncation {
            w_max,
            h_max,
            j_max: Some(j_max),
        },
        source: SpectrumSource::ErrorEvents,
    })
}

/// Default cap on `states * (w_max + 1) * (h_max + 1)` for the exact route.
pub const DEFAULT_CELL_BUDGET: usize = 50_000_000;

/// Exact block IOWC by forward dynamic programming over `n_steps`
/// information steps. `limits` optionally truncates `(w_max, h_max)`; counts
/// inside the limits stay exact because weights only grow along a path.
pub fn exact_block_iowc(
    trellis: &Trellis,
    n_steps: usize,
    termination: Termination,
    limits: Option<(u32, u32)>,
    cell_budget: usize,
) -> Result<WeightSpectrum> {
    let k = trellis.k_in();
    let total_steps = trellis.frame_steps(n_steps, termination);
    let (w_max, h_max) = limits.unwrap_or(((n_steps * k) as u32, (total_steps * trellis.n_out()) as u32));
    let wd = w_max as usize + 1;
    let hd = h_max as usize + 1;
    let ns = trellis.num_states();
    let cells_needed = ns.saturating_mul(wd).saturating_mul(hd);
    if cells_needed > cell_budget {
        return Err(Error::Resource(format!(
            "exact IOWC table needs {ns} states x {wd} input weights x {hd} output weights = {cells_needed} cells, budget {cell_budget}"
        )));
    }
    let idx = |s: usize, w: usize, h: usize| (s * wd + w) * hd + h;
    let mut cur = vec![BigUint::zero(); cells_needed];
    cur[idx(0, 0, 0)] = BigUint::one();
    let mut reach = vec![false; ns];
    reach[0] = true;
    for t in 0..total_steps {
        let mut nxt = vec![BigUint::zero(); cells_needed];
        let mut nreach = vec![false; ns];
        for s in 0..ns {
            if !reach[s] {
                continue;
            }
            let inputs: Vec<usize> = if t < n_steps {
                (0..trellis.num_branches()).collect()
            } else {
                vec![trellis.tail_input(s)]
            };
            for u in inputs {
                let dw = if t < n_steps { u.count_ones() as usize } else { 0 };
                let dh = trellis.output(s, u).count_ones() as usize;
                let s2 = trellis.next_state(s, u);
                nreach[s2] = true;
                for w in 0..wd.saturating_sub(dw) {
                    for h in 0..hd.saturating_sub(dh) {
                        let c = &cur[idx(s, w, h)];
                        if !c.is_zero() {
                            let add = c.clone();
                            nxt[idx(s2, w + dw, h + dh)] += add;
                        }
                    }
                }
            }
        }
        cur = nxt;
        reach = nreach;
    }
    let finals: Vec<usize> = match termination {
        Termination::Terminated => vec![0],
        Termination::Truncated => (0..ns).collect(),
    };
    let mut cells = WeightPoly::new();
    for s in finals {
        for w in 0..wd {
            for h in 0..hd {
                let c = &cur[idx(s, w, h)];
                if !c.is_zero() {
                    *cells.entry((w as u32, h as u32)).or_default() += c;
                }
            }
        }
    }
    Ok(WeightSpectrum {
        cells,
        by_events: None,
        steps: n_steps,
        k_in: k,
        truncation: Truncation {
            w_max,
            h_max,
            j_max: None,
        },
        source: SpectrumSource::Exact,
    })
}

/// Brute-force IOWC by encoding every one of the `2^(k * n_steps)` inputs.
/// Only practical for small frames; serves as an independent oracle.
pub fn brute_force_iowc(trellis: &Trellis, n_steps: usize, termination: Termination) -> Result<WeightSpectrum> {
    let kbits = n_steps * trellis.k_in();
    if kbits > 24 {
        return Err(Error::Resource(format!("brute force over 2^{kbits} inputs refused")));
    }
    let mut cells = WeightPoly::new();
    let mut info = vec![0u8; kbits];
    for m in 0u64..(1u64 << kbits) {
        for (i, b) in info.iter_mut().enumerate() {
            *b = ((m >> i) & 1) as u8;
        }
        let cw = trellis.encode(&info, termination)?;
        let w = m.count_ones();
        let h = cw.bits.iter().map(|&b| b as u32).sum::<u32>();
        *cells.entry((w, h)).or_default() += 1u32;
    }
    let h_max = (trellis.frame_steps(n_steps, termination) * trellis.n_out()) as u32;
    Ok(WeightSpectrum::from_cells(
        cells,
        n_steps,
        trellis.k_in(),
        Truncation {
            w_max: kbits as u32,
            h_max,
            j_max: None,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trellis::ConvCodeSpec;

    fn ff75() -> Trellis {
        ConvCodeSpec::from_octal(1, 2, 2, &[&["7", "5"]], &[], false, Termination::Terminated)
            .unwrap()
            .build_trellis()
            .unwrap()
    }

    fn accumulator() -> Trellis {
        ConvCodeSpec::from_octal(1, 1, 1, &[&["3"]], &["3"], true, Termination::Terminated)
            .unwrap()
            .build_trellis()
            .unwrap()
    }

    const WIDE: EventLimits = EventLimits {
        w_max: 12,
        h_max: 30,
        len_max: 64,
    };

    #[test]
    fn ff75_single_weight_one_event() {
        let ev = enumerate_error_events(&ff75(), WIDE);
        let w1: Vec<_> = ev.table.iter().filter(|(k, _)| k.0 == 1).collect();
        assert_eq!(w1.len(), 1);
        assert_eq!(*w1[0].0, (1, 5, 3));
        assert_eq!(*w1[0].1, BigUint::one());
        // T(W,H) = W H^5 / (1 - 2 W H): 2^(w-1) events of weight w+4
        let t = ev.enumerator();
        for w in 1..=6u32 {
            assert_eq!(t.get(&(w, w + 4)).cloned().unwrap_or_default(), BigUint::from(1u32 << (w - 1)));
        }
    }

    #[test]
    fn identity_single_event() {
        let t = ConvCodeSpec::identity().build_trellis().unwrap();
        let ev = enumerate_error_events(&t, WIDE);
        assert_eq!(ev.table.len(), 1);
        assert_eq!(ev.table.get(&(1, 1, 1)), Some(&BigUint::one()));
    }

    #[test]
    fn accumulator_needs_two_inputs() {
        let ev = enumerate_error_events(
            &accumulator(),
            EventLimits {
                w_max: 8,
                h_max: 40,
                len_max: 16,
            },
        );
        assert_eq!(ev.min_input_weight(), Some(2));
        assert!(ev.table.keys().all(|k| k.0 % 2 == 0));
    }

    #[test]
    fn length_limit_is_flagged() {
        let ev = enumerate_error_events(
            &accumulator(),
            EventLimits {
                w_max: 1,
                h_max: 100,
                len_max: 5,
            },
        );
        assert!(ev.is_empty());
        assert!(ev.length_limited);
    }

    #[test]
    fn single_placement_term() {
        let ev = enumerate_error_events(&ff75(), WIDE);
        let a = events_to_block_iowc(&ev, 100, 1).unwrap();
        assert_eq!(a.get(1, 5), BigUint::from(100u32));
        assert_eq!(a.get(0, 0), BigUint::one());
        assert!(a.cells().iter().all(|(&(w, h), c)| w > 0 || h == 0 || c.is_zero()));
        assert!(matches!(events_to_block_iowc(&ev, 100, 0), Err(Error::Input(_))));
    }

    #[test]
    fn exact_rows_sum_to_binomials() {
        let t = ff75();
        let a = exact_block_iowc(&t, 8, Termination::Terminated, None, DEFAULT_CELL_BUDGET).unwrap();
        for w in 0..=8u32 {
            assert_eq!(a.row_total(w), binomial(8, w as u64));
        }
        assert_eq!(a.nonzero().filter(|(w, _, _)| *w == 1).map(|(_, h, _)| h).min(), Some(5));
        assert_eq!(a.get(0, 0), BigUint::one());
    }

    #[test]
    fn identity_exact() {
        let t = ConvCodeSpec::identity().build_trellis().unwrap();
        let a = exact_block_iowc(&t, 4, Termination::Terminated, None, DEFAULT_CELL_BUDGET).unwrap();
        for w in 0..=4u32 {
            for h in 0..=4u32 {
                let want = if h == w { binomial(4, w as u64) } else { BigUint::zero() };
                assert_eq!(a.get(w, h), want);
            }
        }
    }

    #[test]
    fn budget_error_names_dimensions() {
        let err = exact_block_iowc(&ff75(), 400, Termination::Terminated, None, 1000).unwrap_err();
        match err {
            Error::Resource(msg) => assert!(msg.contains("4 states")),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn exact_matches_brute_force_small() {
        for term in [Termination::Terminated, Termination::Truncated] {
            let t = ff75();
            let a = exact_block_iowc(&t, 6, term, None, DEFAULT_CELL_BUDGET).unwrap();
            let b = brute_force_iowc(&t, 6, term).unwrap();
            assert_eq!(a.cells(), b.cells());
        }
    }

    #[test]
    fn truncated_exact_agrees_inside_limits() {
        let t = ff75();
        let full = exact_block_iowc(&t, 10, Termination::Terminated, None, DEFAULT_CELL_BUDGET).unwrap();
        let cut = exact_block_iowc(&t, 10, Termination::Terminated, Some((3, 9)), DEFAULT_CELL_BUDGET).unwrap();
        for (&(w, h), c) in cut.cells() {
            assert_eq!(*c, full.get(w, h));
        }
        for (&(w, h), c) in full.cells() {
            if w <= 3 && h <= 9 {
                assert_eq!(*c, cut.get(w, h));
            }
        }
    }

    #[test]
    fn convolution_order_irrelevant() {
        let ev = enumerate_error_events(&ff75(), WIDE);
        let t = ev.enumerator();
        let t2 = convolve(&t, &t, 12, 30);
        let left = convolve(&convolve(&t2, &t, 12, 30), &t, 12, 30);
        let right = convolve(&t2, &t2, 12, 30);
        assert_eq!(left, right);
    }

    #[test]
    fn csv_export_has_header() {
        let ev = enumerate_error_events(&ff75(), WIDE);
        let a = events_to_block_iowc(&ev, 20, 2).unwrap();
        let mut buf = Vec::new();
        a.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("w,h,j,count\n1,5,1,1\n"));
    }
}
