//! Uniform-interleaver combination of component IOWCs and the resulting
//! bit-error-probability bounds over AWGN and Rayleigh fading.

use crate::error::{Error, Result};
use crate::numeric::{adaptive_simpson, binomial, ln_biguint, ln_factorial, ln_q_function, max_star, LogSum};
use crate::scheme::{ConcatScheme, SchemeKind, SchemeTrellises};
use crate::spectrum::{
    enumerate_error_events, events_to_block_iowc, exact_block_iowc, EventLimits, Truncation, WeightSpectrum,
    DEFAULT_CELL_BUDGET,
};
use crate::trellis::{SearchLimits, Trellis};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;
use std::fmt;
use std::io::{self, Write};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    Awgn,
    /// Independent Rayleigh amplitude per code bit, perfect CSI.
    Rayleigh,
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Channel::Awgn => "AWGN",
            Channel::Rayleigh => "Rayleigh-CSI",
        })
    }
}

/// Form of the pairwise error probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PepForm {
    /// `Q(sqrt(2 R d gamma))` on AWGN; the exact fading average by
    /// quadrature on Rayleigh.
    Exact,
    /// `exp(-R d gamma) / 2` on AWGN; `(1 + R gamma)^-d / 2` on Rayleigh.
    Chernoff,
}

impl fmt::Display for PepForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PepForm::Exact => "exact",
            PepForm::Chernoff => "chernoff",
        })
    }
}

/// ln of the AWGN pairwise error probability for Hamming distance `d`.
pub fn ln_pep_awgn(d: u32, rate: f64, gamma: f64, form: PepForm) -> f64 {
    let x = rate * d as f64 * gamma;
    match form {
        PepForm::Exact => ln_q_function((2.0 * x).sqrt()),
        PepForm::Chernoff => -std::f64::consts::LN_2 - x,
    }
}

pub fn pairwise_error_awgn(d: u32, rate: f64, gamma: f64, form: PepForm) -> f64 {
    ln_pep_awgn(d, rate, gamma, form).exp()
}

/// ln of the Rayleigh-averaged pairwise error probability.
pub fn ln_pep_rayleigh(d: u32, rate: f64, gamma: f64, form: PepForm) -> f64 {
    let c = rate * gamma;
    let lead = -(d as f64) * c.ln_1p();
    match form {
        PepForm::Chernoff => -std::f64::consts::LN_2 + lead,
        PepForm::Exact => {
            // (1/pi) int_0^{pi/2} (sin^2 t / (sin^2 t + c))^d dt, with the
            // (1+c)^-d factor pulled out so the integrand stays in [0, 1].
            let dd = d as f64;
            let f = |t: f64| {
                let s = t.sin().powi(2);
                if s <= 0.0 {
                    0.0
                } else {
                    ((1.0 + c) * s / (s + c)).powf(dd)
                }
            };
            lead + (adaptive_simpson(&f, 0.0, PI / 2.0, 1e-12) / PI).ln()
        }
    }
}

pub fn pairwise_error_rayleigh(d: u32, rate: f64, gamma: f64, form: PepForm) -> f64 {
    ln_pep_rayleigh(d, rate, gamma, form).exp()
}

pub fn ln_pep(channel: Channel, d: u32, rate: f64, gamma: f64, form: PepForm) -> f64 {
    match channel {
        Channel::Awgn => ln_pep_awgn(d, rate, gamma, form),
        Channel::Rayleigh => ln_pep_rayleigh(d, rate, gamma, form),
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// One combined coefficient, kept exactly and as a natural log.
#[derive(Debug, Clone, PartialEq)]
pub struct IowcCell {
    pub exact: BigRational,
    pub ln: f64,
}

/// Combined IOWC of a concatenated scheme. Keys are `(w, h1, h2)`; for
/// PCCC and SCCC `h2` is always 0 and `h1` is the total output weight.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcatIOWC {
    pub kind: SchemeKind,
    pub table: BTreeMap<(u32, u32, u32), IowcCell>,
    pub n1: usize,
    pub n2: usize,
    /// Component truncations in layout order.
    pub truncation: Vec<Truncation>,
}

fn ln_rational(r: &BigRational) -> f64 {
    if r.is_zero() {
        return f64::NEG_INFINITY;
    }
    let n = r.numer().magnitude();
    let d = r.denom().magnitude();
    ln_biguint(n) - ln_biguint(d)
}

fn cell(exact: BigRational) -> IowcCell {
    IowcCell {
        ln: ln_rational(&exact),
        exact,
    }
}

fn big(x: &num_bigint::BigUint) -> BigInt {
    BigInt::from(x.clone())
}

impl ConcatIOWC {
    pub fn get(&self, w: u32, h1: u32, h2: u32) -> BigRational {
        self.table
            .get(&(w, h1, h2))
            .map(|c| c.exact.clone())
            .unwrap_or_else(BigRational::zero)
    }

    /// Single-output lookup for PCCC/SCCC tables.
    pub fn get_wh(&self, w: u32, h: u32) -> BigRational {
        self.get(w, h, 0)
    }

    /// Cells contributing to the bound (`w > 0`).
    pub fn terms(&self) -> impl Iterator<Item = (u32, u32, &IowcCell)> {
        self.table
            .iter()
            .filter(|(&(w, _, _), c)| w > 0 && !c.exact.is_zero())
            .map(|(&(w, h1, h2), c)| (w, h1 + h2, c))
    }

    pub fn is_empty(&self) -> bool {
        self.terms().next().is_none()
    }
}

fn check_len(name: &str, spec: &WeightSpectrum, want: usize) -> Result<()> {
    if spec.info_len() != want {
        return Err(Error::Dimension(format!(
            "{name} spectrum covers {} information bits, expected {want}",
            spec.info_len()
        )));
    }
    Ok(())
}

/// `X[w][h] = sum_l A^o_{w,l} A^i_{l,h} / C(n2, l)`, the SCCC combination.
fn serial_core(outer: &WeightSpectrum, inner: &WeightSpectrum, n2: usize) -> BTreeMap<(u32, u32), BigRational> {
    let mut inner_rows: BTreeMap<u32, Vec<(u32, BigInt)>> = BTreeMap::new();
    for (&(l, h), c) in inner.cells() {
        if !c.is_zero() {
            inner_rows.entry(l).or_default().push((h, big(c)));
        }
    }
    let mut denoms: HashMap<u32, BigInt> = HashMap::new();
    let mut out: BTreeMap<(u32, u32), BigRational> = BTreeMap::new();
    for (&(w, l), a_o) in outer.cells() {
        if a_o.is_zero() {
            continue;
        }
        let Some(row) = inner_rows.get(&l) else { continue };
        let den = denoms
            .entry(l)
            .or_insert_with(|| BigInt::from(binomial(n2 as u64, l as u64)))
            .clone();
        if den.is_zero() {
            continue;
        }
        let a_o = big(a_o);
        for (h, a_i) in row {
            let term = BigRational::new(&a_o * a_i, den.clone());
            *out.entry((w, *h)).or_insert_with(BigRational::zero) += term;
        }
    }
    out
}

/// HCTC IOWC: `A_{w,h1,h2} = sum_l A^p_{w,h1} A^o_{w,l} A^i_{l,h2} / (C(N1,w) C(N2,l))`.
/// `A_p` is the parity-only spectrum of the parallel code.
pub fn hctc_iowc(
    a_p: &WeightSpectrum,
    a_o: &WeightSpectrum,
    a_i: &WeightSpectrum,
    n1: usize,
    n2: usize,
) -> Result<ConcatIOWC> {
    check_len("parallel", a_p, n1)?;
    check_len("outer", a_o, n1)?;
    check_len("inner", a_i, n2)?;
    if a_o.steps() == 0 || n2 % a_o.steps() != 0 || a_i.steps() != a_o.steps() {
        return Err(Error::Dimension(format!(
            "N2/p = N1/k violated: outer has {} steps, inner has {} steps over N2 = {n2}",
            a_o.steps(),
            a_i.steps()
        )));
    }
    let serial = serial_core(a_o, a_i, n2);
    let mut table = BTreeMap::new();
    let mut d1: HashMap<u32, BigInt> = HashMap::new();
    for (&(w, h1), ap) in a_p.cells() {
        if ap.is_zero() {
            continue;
        }
        let den = d1
            .entry(w)
            .or_insert_with(|| BigInt::from(binomial(n1 as u64, w as u64)))
            .clone();
        let scale = BigRational::new(big(ap), den);
        for (&(_, h2), x) in serial.range((w, 0)..=(w, u32::MAX)) {
            let v = &scale * x;
            if !v.is_zero() {
                table.insert((w, h1, h2), cell(v));
            }
        }
    }
    Ok(ConcatIOWC {
        kind: SchemeKind::Hctc,
        table,
        n1,
        n2,
        truncation: vec![a_p.truncation(), a_o.truncation(), a_i.truncation()],
    })
}

/// PCCC IOWC from the parity-only spectra of both components:
/// `A_{w,h} = sum_{w+h1+h2=h} A^1_{w,h1} A^2_{w,h2} / C(N,w)`; the systematic
/// bits are counted once, in the `w` term.
pub fn pccc_iowc(a_1: &WeightSpectrum, a_2: &WeightSpectrum, n: usize) -> Result<ConcatIOWC> {
    check_len("first", a_1, n)?;
    check_len("second", a_2, n)?;
    let mut acc: BTreeMap<(u32, u32), BigRational> = BTreeMap::new();
    for (&(w, h1), c1) in a_1.cells() {
        if c1.is_zero() {
            continue;
        }
        let den = BigInt::from(binomial(n as u64, w as u64));
        for (&(_, h2), c2) in a_2.cells().range((w, 0)..=(w, u32::MAX)) {
            if c2.is_zero() {
                continue;
            }
            let v = BigRational::new(big(c1) * big(c2), den.clone());
            *acc.entry((w, w + h1 + h2)).or_insert_with(BigRational::zero) += v;
        }
    }
    Ok(ConcatIOWC {
        kind: SchemeKind::Pccc,
        table: acc.into_iter().map(|((w, h), v)| ((w, h, 0), cell(v))).collect(),
        n1: n,
        n2: n,
        truncation: vec![a_1.truncation(), a_2.truncation()],
    })
}

/// SCCC IOWC: `A_{w,h} = sum_l A^o_{w,l} A^i_{l,h} / C(N2,l)`.
pub fn sccc_iowc(a_o: &WeightSpectrum, a_i: &WeightSpectrum, n2: usize) -> Result<ConcatIOWC> {
    check_len("inner", a_i, n2)?;
    let n1 = a_o.info_len();
    let serial = serial_core(a_o, a_i, n2);
    Ok(ConcatIOWC {
        kind: SchemeKind::Sccc,
        table: serial.into_iter().map(|((w, h), v)| ((w, h, 0), cell(v))).collect(),
        n1,
        n2,
        truncation: vec![a_o.truncation(), a_i.truncation()],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundKind {
    /// Union bound over the combined IOWC.
    Union,
    /// Large-N expansion with binomials replaced by `N^n / n!`.
    Binomial,
    Asymptotic,
}

impl fmt::Display for BoundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundKind::Union => "union",
            BoundKind::Binomial => "binomial",
            BoundKind::Asymptotic => "asymptotic",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundPoint {
    pub ebn0_db: f64,
    pub ln_pb: f64,
}

impl BoundPoint {
    /// The bound value; may exceed 1 at low SNR.
    pub fn pb(&self) -> f64 {
        self.ln_pb.exp()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundCurve {
    pub scheme_id: String,
    pub kind: SchemeKind,
    pub bound: BoundKind,
    pub channel: Channel,
    pub pep: PepForm,
    pub rate: f64,
    pub n1: usize,
    pub n2: usize,
    pub truncation: Vec<Truncation>,
    pub points: Vec<BoundPoint>,
}

fn join_trunc<F: Fn(&Truncation) -> String>(t: &[Truncation], f: F) -> String {
    t.iter().map(f).collect::<Vec<_>>().join("/")
}

impl BoundCurve {
    pub const CSV_HEADER: &'static str = "EbN0_dB,Pb_bound,channel,scheme_id,N1,N2,bound,pep,w_max,h_max,j_max";

    /// CSV rows without header. Truncation fields list one value per
    /// component separated by `/`.
    pub fn write_csv_rows<W: Write>(&self, mut out: W) -> io::Result<()> {
        let w = join_trunc(&self.truncation, |t| t.w_max.to_string());
        let h = join_trunc(&self.truncation, |t| t.h_max.to_string());
        let j = join_trunc(&self.truncation, |t| t.j_max.map(|j| j.to_string()).unwrap_or_default());
        for p in &self.points {
            writeln!(
                out,
                "{},{:.6e},{},{},{},{},{},{},{w},{h},{j}",
                p.ebn0_db,
                p.pb(),
                self.channel,
                self.scheme_id,
                self.n1,
                self.n2,
                self.bound,
                self.pep
            )?;
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{}", Self::CSV_HEADER)?;
        self.write_csv_rows(out)
    }
}

/// Union bound `P_b <= sum (w/N1) A_{w,h} PEP(h)` evaluated in the log domain.
pub fn union_bound(
    iowc: &ConcatIOWC,
    scheme: &ConcatScheme,
    channel: Channel,
    pep: PepForm,
    snr_db: &[f64],
) -> Result<BoundCurve> {
    if iowc.is_empty() {
        return Err(Error::Input("IOWC has no terms with w > 0".into()));
    }
    if iowc.n1 != scheme.n1 || iowc.kind != scheme.kind() {
        return Err(Error::Dimension(format!(
            "IOWC is {} with N1 = {}, scheme is {} with N1 = {}",
            iowc.kind,
            iowc.n1,
            scheme.kind(),
            scheme.n1
        )));
    }
    // Collapse to (h -> ln sum w A / N1) once, then sweep the grid.
    let mut by_h: BTreeMap<u32, LogSum> = BTreeMap::new();
    let ln_n1 = (iowc.n1 as f64).ln();
    for (w, h, c) in iowc.terms() {
        by_h.entry(h).or_default().push((w as f64).ln() - ln_n1 + c.ln);
    }
    let weights: Vec<(u32, f64)> = by_h.into_iter().map(|(h, s)| (h, s.ln_total())).collect();
    let points = snr_db
        .iter()
        .map(|&db| {
            let g = db_to_linear(db);
            let mut sum = LogSum::new();
            for &(h, lw) in &weights {
                sum.push(lw + ln_pep(channel, h, scheme.rate, g, pep));
            }
            BoundPoint {
                ebn0_db: db,
                ln_pb: sum.ln_total(),
            }
        })
        .collect();
    Ok(BoundCurve {
        scheme_id: scheme.id.clone(),
        kind: scheme.kind(),
        bound: BoundKind::Union,
        channel,
        pep,
        rate: scheme.rate,
        n1: iowc.n1,
        n2: iowc.n2,
        truncation: iowc.truncation.clone(),
        points,
    })
}

/// Which route builds the component spectra.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumMethod {
    /// Error events placed in `C(N, j)` ways; keeps the per-`j` split needed
    /// by the exponent scan.
    Events,
    /// Truncated forward dynamic programme over the whole frame.
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumConfig {
    pub method: SpectrumMethod,
    pub w_max: u32,
    /// Each component keeps output weights up to its free distance plus this.
    pub h_span: u32,
    pub j_max: u32,
    pub len_max: usize,
    pub cell_budget: usize,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            method: SpectrumMethod::Events,
            w_max: 12,
            h_span: 20,
            j_max: 6,
            len_max: 256,
            cell_budget: DEFAULT_CELL_BUDGET,
        }
    }
}

/// Component spectra of a scheme; parallel branches are parity-only.
#[derive(Debug, Clone)]
pub enum ComponentSpectra {
    Pccc { first: WeightSpectrum, second: WeightSpectrum },
    Sccc { outer: WeightSpectrum, inner: WeightSpectrum },
    Hctc {
        parallel: WeightSpectrum,
        outer: WeightSpectrum,
        inner: WeightSpectrum,
    },
}

fn component(
    trellis: &Trellis,
    steps: usize,
    termination: crate::trellis::Termination,
    w_max: u32,
    cfg: &SpectrumConfig,
) -> Result<WeightSpectrum> {
    let dfree = trellis.free_distance(SearchLimits::default())?;
    let h_max = dfree + cfg.h_span;
    match cfg.method {
        SpectrumMethod::Events => {
            let ev = enumerate_error_events(
                trellis,
                EventLimits {
                    w_max,
                    h_max,
                    len_max: cfg.len_max,
                },
            );
            if ev.length_limited {
                log::warn!("error-event search hit len_max = {}", cfg.len_max);
            }
            events_to_block_iowc(&ev, steps, cfg.j_max)
        }
        SpectrumMethod::Exact => exact_block_iowc(trellis, steps, termination, Some((w_max, h_max)), cfg.cell_budget),
    }
}

impl ComponentSpectra {
    pub fn compute(scheme: &ConcatScheme, cfg: &SpectrumConfig) -> Result<Self> {
        use crate::scheme::Layout;
        let tr = scheme.trellises()?;
        Ok(match (&scheme.layout, tr) {
            (Layout::Pccc { first, second }, SchemeTrellises::Pccc { first: t1, second_parity }) => {
                let steps = scheme.n1 / first.k_in;
                ComponentSpectra::Pccc {
                    first: component(&t1.parity_only()?, steps, first.termination, cfg.w_max, cfg)?,
                    second: component(&second_parity, steps, second.termination, cfg.w_max, cfg)?,
                }
            }
            (Layout::Sccc { outer, inner }, SchemeTrellises::Sccc { outer: to, inner: ti }) => {
                let a_o = component(&to, scheme.n1 / outer.k_in, outer.termination, cfg.w_max, cfg)?;
                let l_max = a_o.truncation().h_max;
                let a_i = component(&ti, scheme.n2 / inner.k_in, inner.termination, l_max, cfg)?;
                ComponentSpectra::Sccc { outer: a_o, inner: a_i }
            }
            (
                Layout::Hctc { parallel, outer, inner },
                SchemeTrellises::Hctc {
                    parallel_parity,
                    outer: to,
                    inner: ti,
                },
            ) => {
                let a_p = component(&parallel_parity, scheme.n1 / parallel.k_in, parallel.termination, cfg.w_max, cfg)?;
                let a_o = component(&to, scheme.n1 / outer.k_in, outer.termination, cfg.w_max, cfg)?;
                let l_max = a_o.truncation().h_max;
                let a_i = component(&ti, scheme.n2 / inner.k_in, inner.termination, l_max, cfg)?;
                ComponentSpectra::Hctc {
                    parallel: a_p,
                    outer: a_o,
                    inner: a_i,
                }
            }
            _ => unreachable!("layout and trellises built from the same scheme"),
        })
    }

    pub fn iowc(&self, scheme: &ConcatScheme) -> Result<ConcatIOWC> {
        match self {
            ComponentSpectra::Pccc { first, second } => pccc_iowc(first, second, scheme.n1),
            ComponentSpectra::Sccc { outer, inner } => sccc_iowc(outer, inner, scheme.n2),
            ComponentSpectra::Hctc { parallel, outer, inner } => hctc_iowc(parallel, outer, inner, scheme.n1, scheme.n2),
        }
    }
}

/// Per-component data for the large-N expansion: `(w, h, n) -> ln A_{w,h,n}`.
fn stratified(spec: &WeightSpectrum, name: &str) -> Result<Vec<(u32, u32, u32, f64)>> {
    let t = spec.by_events().ok_or_else(|| {
        Error::Input(format!("{name} spectrum has no per-event split; use the error-event method"))
    })?;
    Ok(t.iter()
        .filter(|(&(w, _, _), c)| w > 0 && !c.is_zero())
        .map(|(&(w, h, j), c)| (w, h, j, ln_biguint(c)))
        .collect())
}

/// Terms of the large-N expansion `P_b ~ sum N^e B PEP(h1 + h2)`, grouped by
/// `(h1, h2, e)` with `ln B` summed over the contributing tuples. `N` is the
/// number of trellis steps of the outer code (PCCC: of either component).
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentScan {
    pub kind: SchemeKind,
    pub terms: BTreeMap<(u32, u32, i32), f64>,
    /// `N` of the spectra the scan was built from.
    pub n_steps: usize,
    pub rate: f64,
}

/// The leading high-SNR term: lowest total weight, largest exponent there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DominantTerm {
    pub h: u32,
    pub alpha: i32,
    pub ln_b: f64,
}

fn accumulate(map: &mut HashMap<(u32, u32, i32), f64>, key: (u32, u32, i32), v: f64) {
    let e = map.entry(key).or_insert(f64::NEG_INFINITY);
    *e = max_star(*e, v);
}

impl ExponentScan {
    pub fn compute(scheme: &ConcatScheme, spectra: &ComponentSpectra) -> Result<Self> {
        use crate::scheme::Layout;
        let mut map: HashMap<(u32, u32, i32), f64> = HashMap::new();
        let ln_fact: Vec<f64> = (0..2048u64).map(ln_factorial).collect();
        let lf = |n: u32| ln_fact.get(n as usize).copied().unwrap_or_else(|| ln_factorial(n as u64));
        let n_steps;
        match (&scheme.layout, spectra) {
            (Layout::Pccc { first, .. }, ComponentSpectra::Pccc { first: a1, second: a2 }) => {
                let k = first.k_in as f64;
                n_steps = a1.steps();
                let s1 = stratified(a1, "first")?;
                let s2 = stratified(a2, "second")?;
                let mut rows2: BTreeMap<u32, Vec<(u32, u32, f64)>> = BTreeMap::new();
                for &(w, h, n, a) in &s2 {
                    rows2.entry(w).or_default().push((h, n, a));
                }
                for &(w, h1, n1, a1) in &s1 {
                    let Some(r) = rows2.get(&w) else { continue };
                    let base = (w as f64 / k).ln() + lf(w) - w as f64 * k.ln() - lf(n1) + a1;
                    for &(h2, n2, a2) in r {
                        let e = n1 as i32 + n2 as i32 - w as i32 - 1;
                        accumulate(&mut map, (w + h1 + h2, 0, e), base - lf(n2) + a2);
                    }
                }
            }
            (Layout::Sccc { outer, inner }, ComponentSpectra::Sccc { outer: ao, inner: ai }) => {
                let k = outer.k_in as f64;
                let p = outer.n_out as f64;
                let sigma_i = (outer.n_out as f64 / inner.k_in as f64).ln();
                n_steps = ao.steps();
                let so = stratified(ao, "outer")?;
                let si = stratified(ai, "inner")?;
                let mut rows_i: BTreeMap<u32, Vec<(u32, u32, f64)>> = BTreeMap::new();
                for &(l, h, n, a) in &si {
                    rows_i.entry(l).or_default().push((h, n, a));
                }
                for &(w, l, no, a_o) in &so {
                    let Some(r) = rows_i.get(&l) else { continue };
                    let base = (w as f64 / k).ln() + lf(l) - l as f64 * p.ln() - lf(no) + a_o;
                    for &(h, ni, a_i) in r {
                        let e = no as i32 + ni as i32 - l as i32 - 1;
                        accumulate(&mut map, (h, 0, e), base + ni as f64 * sigma_i - lf(ni) + a_i);
                    }
                }
            }
            (
                Layout::Hctc { outer, .. },
                ComponentSpectra::Hctc {
                    parallel: ap,
                    outer: ao,
                    inner: ai,
                },
            ) => {
                let k = outer.k_in as f64;
                let p = outer.n_out as f64;
                n_steps = ao.steps();
                let sp = stratified(ap, "parallel")?;
                let so = stratified(ao, "outer")?;
                let si = stratified(ai, "inner")?;
                let mut rows_i: BTreeMap<u32, Vec<(u32, u32, f64)>> = BTreeMap::new();
                for &(l, h, n, a) in &si {
                    rows_i.entry(l).or_default().push((h, n, a));
                }
                // Serial part per w: (h2, n_o + n_i - l) -> ln sum.
                let mut serial: BTreeMap<u32, HashMap<(u32, i32), f64>> = BTreeMap::new();
                for &(w, l, no, a_o) in &so {
                    let Some(r) = rows_i.get(&l) else { continue };
                    let base = lf(l) - l as f64 * p.ln() - lf(no) + a_o;
                    let row = serial.entry(w).or_default();
                    for &(h2, ni, a_i) in r {
                        let key = (h2, no as i32 + ni as i32 - l as i32);
                        let e = row.entry(key).or_insert(f64::NEG_INFINITY);
                        *e = max_star(*e, base - lf(ni) + a_i);
                    }
                }
                for &(w, h1, np, a_p) in &sp {
                    let Some(row) = serial.get(&w) else { continue };
                    let base = (w as f64 / k).ln() + lf(w) - w as f64 * k.ln() - lf(np) + a_p;
                    for (&(h2, partial), &v) in row {
                        let e = np as i32 + partial - w as i32 - 1;
                        accumulate(&mut map, (h1, h2, e), base + v);
                    }
                }
            }
            _ => return Err(Error::Input("spectra do not match the scheme layout".into())),
        }
        if map.is_empty() {
            return Err(Error::Input("exponent scan found no terms".into()));
        }
        Ok(Self {
            kind: scheme.kind(),
            terms: map.into_iter().collect(),
            n_steps,
            rate: scheme.rate,
        })
    }

    /// Largest N-exponent over every term.
    pub fn alpha_max(&self) -> i32 {
        self.terms.keys().map(|k| k.2).max().unwrap_or(i32::MIN)
    }

    /// Largest exponent among terms with exactly these output weights.
    pub fn alpha_at(&self, h1: u32, h2: u32) -> Option<i32> {
        self.terms
            .range((h1, h2, i32::MIN)..=(h1, h2, i32::MAX))
            .map(|(k, _)| k.2)
            .max()
    }

    pub fn dominant(&self) -> DominantTerm {
        let h = self.terms.keys().map(|k| k.0 + k.1).min().unwrap_or(0);
        let alpha = self
            .terms
            .keys()
            .filter(|k| k.0 + k.1 == h)
            .map(|k| k.2)
            .max()
            .unwrap_or(i32::MIN);
        let mut b = LogSum::new();
        for (k, &v) in &self.terms {
            if k.0 + k.1 == h && k.2 == alpha {
                b.push(v);
            }
        }
        DominantTerm {
            h,
            alpha,
            ln_b: b.ln_total(),
        }
    }

    /// ln of the expansion evaluated at `n` steps.
    pub fn ln_bound_at(&self, n: f64, channel: Channel, pep: PepForm, gamma: f64) -> f64 {
        let mut by_h: BTreeMap<u32, LogSum> = BTreeMap::new();
        for (&(h1, h2, e), &ln_b) in &self.terms {
            by_h.entry(h1 + h2).or_default().push(e as f64 * n.ln() + ln_b);
        }
        let mut s = LogSum::new();
        for (h, acc) in by_h {
            s.push(acc.ln_total() + ln_pep(channel, h, self.rate, gamma, pep));
        }
        s.ln_total()
    }

    /// The expansion as a curve at the scan's own `N`.
    pub fn curve(&self, scheme: &ConcatScheme, channel: Channel, pep: PepForm, snr_db: &[f64]) -> BoundCurve {
        let n = self.n_steps as f64;
        BoundCurve {
            scheme_id: scheme.id.clone(),
            kind: scheme.kind(),
            bound: BoundKind::Binomial,
            channel,
            pep,
            rate: scheme.rate,
            n1: scheme.n1,
            n2: scheme.n2,
            truncation: Vec::new(),
            points: snr_db
                .iter()
                .map(|&db| BoundPoint {
                    ebn0_db: db,
                    ln_pb: self.ln_bound_at(n, channel, pep, db_to_linear(db)),
                })
                .collect(),
        }
    }
}

/// Parameters of the asymptotic HCTC bound `B_m N^-d_f^o PEP(h_m^p + h_m^i)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticParams {
    pub h_m_p: Option<u32>,
    pub h_m_i: Option<u32>,
    pub d_f_o: Option<u32>,
    pub w_m: Option<u32>,
    /// Exponent of the dominant term found by the scan.
    pub alpha: Option<i32>,
    pub ln_b_m: Option<f64>,
}

impl AsymptoticParams {
    /// Free distances from trellis searches, `w_m` from the error events and
    /// `alpha`, `B_m` from the dominant term of `scan`.
    pub fn derive(scheme: &ConcatScheme, spectra: &ComponentSpectra, scan: &ExponentScan) -> Result<Self> {
        let SchemeTrellises::Hctc {
            parallel_parity,
            outer,
            inner,
        } = scheme.trellises()?
        else {
            return Err(Error::Input("asymptotic parameters are defined for HCTC only".into()));
        };
        let ComponentSpectra::Hctc { parallel, outer: ao, .. } = spectra else {
            return Err(Error::Input("asymptotic parameters need HCTC spectra".into()));
        };
        let lim = SearchLimits::default();
        let w_m = match (parallel.min_input_weight(), ao.min_input_weight()) {
            (Some(a), Some(b)) => Some(a.max(b)),
            _ => None,
        };
        let dom = scan.dominant();
        Ok(Self {
            h_m_p: Some(parallel_parity.free_distance(lim)?),
            h_m_i: Some(inner.free_distance(lim)?),
            d_f_o: Some(outer.free_distance(lim)?),
            w_m,
            alpha: Some(dom.alpha),
            ln_b_m: Some(dom.ln_b),
        })
    }
}

/// `P_b = B_m N^{-d_f^o} PEP(h_m^p + h_m^i)` with `N = N1 / k_o`.
pub fn asymptotic_bound(
    params: &AsymptoticParams,
    scheme: &ConcatScheme,
    channel: Channel,
    pep: PepForm,
    snr_db: &[f64],
) -> Result<BoundCurve> {
    let (Some(hp), Some(hi), Some(df), Some(ln_b)) = (params.h_m_p, params.h_m_i, params.d_f_o, params.ln_b_m) else {
        return Err(Error::Input("asymptotic bound needs h_m_p, h_m_i, d_f_o and B_m".into()));
    };
    let k_o = scheme
        .outer()
        .map(|o| o.k_in)
        .ok_or_else(|| Error::Input("asymptotic bound needs an outer code".into()))?;
    let n = (scheme.n1 / k_o) as f64;
    let points = snr_db
        .iter()
        .map(|&db| BoundPoint {
            ebn0_db: db,
            ln_pb: ln_b - df as f64 * n.ln() + ln_pep(channel, hp + hi, scheme.rate, db_to_linear(db), pep),
        })
        .collect();
    Ok(BoundCurve {
        scheme_id: scheme.id.clone(),
        kind: scheme.kind(),
        bound: BoundKind::Asymptotic,
        channel,
        pep,
        rate: scheme.rate,
        n1: scheme.n1,
        n2: scheme.n2,
        truncation: Vec::new(),
        points,
    })
}

/// Convenience: rational to f64 for reporting.
pub fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or_else(|| ln_rational(r).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::WeightPoly;
    use num_bigint::BigUint;

    fn identity_spectrum(n: usize) -> WeightSpectrum {
        let mut cells = WeightPoly::new();
        for w in 0..=n as u32 {
            cells.insert((w, w), binomial(n as u64, w as u64));
        }
        WeightSpectrum::from_cells(
            cells,
            n,
            1,
            Truncation {
                w_max: n as u32,
                h_max: n as u32,
                j_max: None,
            },
        )
    }

    #[test]
    fn identity_hctc_collapses() {
        let a = identity_spectrum(4);
        let c = hctc_iowc(&a, &a, &a, 4, 4).unwrap();
        for w in 0..=4u32 {
            for h1 in 0..=4 {
                for h2 in 0..=4 {
                    let want = if h1 == w && h2 == w {
                        BigRational::from_integer(BigInt::from(binomial(4, w as u64)))
                    } else {
                        BigRational::zero()
                    };
                    assert_eq!(c.get(w, h1, h2), want, "{w} {h1} {h2}");
                }
            }
        }
    }

    #[test]
    fn identity_pccc_places_at_three_w() {
        let a = identity_spectrum(5);
        let c = pccc_iowc(&a, &a, 5).unwrap();
        assert_eq!(c.get_wh(0, 0), BigRational::from_integer(1.into()));
        for w in 1..=5u32 {
            let want = BigRational::from_integer(BigInt::from(binomial(5, w as u64)));
            assert_eq!(c.get_wh(w, 3 * w), want);
        }
        assert_eq!(c.table.len(), 6);
    }

    #[test]
    fn identity_outer_sccc_returns_inner() {
        let a = identity_spectrum(6);
        let mut cells = WeightPoly::new();
        cells.insert((0, 0), BigUint::from(1u32));
        cells.insert((1, 3), BigUint::from(6u32));
        cells.insert((2, 4), BigUint::from(7u32));
        let inner = WeightSpectrum::from_cells(
            cells,
            6,
            1,
            Truncation {
                w_max: 6,
                h_max: 9,
                j_max: None,
            },
        );
        let c = sccc_iowc(&a, &inner, 6).unwrap();
        assert_eq!(c.get_wh(1, 3), BigRational::from_integer(6.into()));
        assert_eq!(c.get_wh(2, 4), BigRational::from_integer(7.into()));
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let a = identity_spectrum(4);
        let b = identity_spectrum(5);
        assert!(matches!(hctc_iowc(&a, &a, &b, 4, 4), Err(Error::Dimension(_))));
        assert!(matches!(pccc_iowc(&a, &b, 4), Err(Error::Dimension(_))));
    }

    #[test]
    fn pep_reference_values() {
        assert_eq!(pairwise_error_awgn(5, 0.0, 1.0, PepForm::Exact), 0.5);
        let v = pairwise_error_awgn(5, 0.5, db_to_linear(6.0), PepForm::Exact);
        assert!((v - 4.06e-6).abs() < 0.01e-6, "{v}");
        assert!((pairwise_error_rayleigh(1, 1.0, 1.0, PepForm::Chernoff) - 0.25).abs() < 1e-15);
        assert!((pairwise_error_rayleigh(3, 1.0, 9.0, PepForm::Chernoff) - 5e-4).abs() < 1e-15);
    }

    #[test]
    fn rayleigh_exact_single_branch_closed_form() {
        // d = 1: 0.5 (1 - sqrt(c / (1 + c))).
        for &c in &[0.3f64, 1.0, 10.0, 100.0] {
            let want = 0.5 * (1.0 - (c / (1.0 + c)).sqrt());
            let got = pairwise_error_rayleigh(1, 1.0, c, PepForm::Exact);
            assert!(((got - want) / want).abs() < 1e-9, "{c}: {got} {want}");
        }
    }

    #[test]
    fn single_cell_bound_is_pep() {
        let mut cells = WeightPoly::new();
        cells.insert((1, 7), BigUint::from(1u32));
        let t = Truncation {
            w_max: 1,
            h_max: 7,
            j_max: None,
        };
        let spec = WeightSpectrum::from_cells(cells, 1, 1, t);
        let id = identity_spectrum(1);
        let iowc = sccc_iowc(&id, &spec, 1).unwrap();
        let scheme = ConcatScheme {
            id: "one".into(),
            layout: crate::scheme::Layout::Sccc {
                outer: crate::trellis::ConvCodeSpec::identity(),
                inner: crate::trellis::ConvCodeSpec::identity(),
            },
            n1: 1,
            n2: 1,
            rate: 0.5,
        };
        let c = union_bound(&iowc, &scheme, Channel::Awgn, PepForm::Exact, &[3.0]).unwrap();
        let want = pairwise_error_awgn(7, 0.5, db_to_linear(3.0), PepForm::Exact);
        assert!((c.points[0].pb() - want).abs() < 1e-15 * want.max(1e-300) * 10.0);
    }
}
