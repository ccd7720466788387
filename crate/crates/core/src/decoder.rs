//! BCJR soft-in soft-out decoding and the iterative schedules for PCCC, SCCC
//! and HCTC.
//!
//! LLRs are `ln P(b = 1) / P(b = 0)` throughout.

use crate::error::{Error, Result};
use crate::scheme::{ConcatScheme, Layout, SchemeKind};
use crate::trellis::{Termination, Trellis};
use rand::seq::SliceRandom;
use rand::Rng;
use std::io::{self, Write};

pub const DEFAULT_CLAMP: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    /// Log-domain MAP with the exact Jacobian logarithm.
    LogMap,
    MaxLogMap,
}

/// Activation order inside one HCTC iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Schedule {
    /// inner, outer, then parallel.
    SerialFirst,
    /// parallel, inner, then outer.
    ParallelFirst,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecodeConfig {
    pub iterations: usize,
    pub algorithm: Algorithm,
    pub clamp: f64,
    pub schedule: Schedule,
    /// Multiplier on every extrinsic message passed between decoders. Max-log
    /// extrinsics are overconfident and iterate better damped to about 0.7.
    pub extrinsic_scale: f64,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        Self {
            iterations: 8,
            algorithm: Algorithm::LogMap,
            clamp: DEFAULT_CLAMP,
            schedule: Schedule::SerialFirst,
            extrinsic_scale: 1.0,
        }
    }
}

impl DecodeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be at least 1".into()));
        }
        if !(self.clamp > 0.0) {
            return Err(Error::Config("LLR clamp must be positive".into()));
        }
        if !(self.extrinsic_scale > 0.0 && self.extrinsic_scale <= 1.0) {
            return Err(Error::Config("extrinsic scale must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SoftRole {
    Channel,
    Apriori,
    Extrinsic,
    Posterior,
}

/// LLRs tagged with their role in the message exchange.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftSequence {
    pub llrs: Vec<f64>,
    pub role: SoftRole,
}

impl SoftSequence {
    pub fn new(llrs: Vec<f64>, role: SoftRole) -> Self {
        Self { llrs, role }
    }

    pub fn hard(&self) -> Vec<u8> {
        hard_decisions(&self.llrs)
    }
}

pub fn hard_decisions(llrs: &[f64]) -> Vec<u8> {
    llrs.iter().map(|&l| u8::from(l > 0.0)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SisoOutput {
    pub extrinsic_info: Vec<f64>,
    pub extrinsic_coded: Vec<f64>,
    pub posterior_info: Vec<f64>,
}

fn clamp_all(v: &[f64], c: f64) -> Vec<f64> {
    v.iter().map(|&x| x.clamp(-c, c)).collect()
}

/// Forward-backward SISO over one frame.
///
/// `channel` holds LLRs on every coded bit including tail steps;
/// `apriori` holds LLRs on the information bits. Extrinsic outputs are the
/// posteriors minus the corresponding input on the same bit.
pub fn siso_decode(
    trellis: &Trellis,
    termination: Termination,
    channel: &[f64],
    apriori: &[f64],
    algorithm: Algorithm,
    clamp: f64,
) -> Result<SisoOutput> {
    let k = trellis.k_in();
    let n = trellis.n_out();
    if apriori.len() % k != 0 {
        return Err(Error::Input(format!("a-priori length {} not divisible by k = {k}", apriori.len())));
    }
    let steps = apriori.len() / k;
    let total = trellis.frame_steps(steps, termination);
    if channel.len() != total * n {
        return Err(Error::Input(format!(
            "channel length {} does not match {total} steps x {n} outputs",
            channel.len()
        )));
    }
    let lc = clamp_all(channel, clamp);
    let la = clamp_all(apriori, clamp);
    let ns = trellis.num_states();
    let nb = trellis.num_branches();
    let ninf = f64::NEG_INFINITY;

    // Branch table: (state, input) -> (next, output); tail steps keep only
    // the terminating input.
    let next: Vec<usize> = (0..ns * nb).map(|i| trellis.next_state(i / nb, i % nb)).collect();
    let out: Vec<u32> = (0..ns * nb).map(|i| trellis.output(i / nb, i % nb)).collect();
    let allowed = |t: usize, s: usize, u: usize| t < steps || trellis.tail_input(s) == u;

    // Branch metrics per step.
    let mut gamma = vec![ninf; total * ns * nb];
    let mut out_metric = vec![0.0; 1 << n];
    let mut in_metric = vec![0.0; nb];
    for t in 0..total {
        for (pat, m) in out_metric.iter_mut().enumerate() {
            *m = (0..n).filter(|j| (pat >> (n - 1 - j)) & 1 == 1).map(|j| lc[t * n + j]).sum();
        }
        for (u, m) in in_metric.iter_mut().enumerate() {
            *m = if t < steps {
                (0..k).filter(|i| (u >> (k - 1 - i)) & 1 == 1).map(|i| la[t * k + i]).sum()
            } else {
                0.0
            };
        }
        for s in 0..ns {
            for u in 0..nb {
                if allowed(t, s, u) {
                    gamma[(t * ns + s) * nb + u] = out_metric[out[s * nb + u] as usize] + in_metric[u];
                }
            }
        }
    }

    let mut alpha = vec![ninf; (total + 1) * ns];
    alpha[0] = 0.0;
    let mut acc = vec![0.0; ns];
    let mut x = vec![ninf; ns * nb];
    for t in 0..total {
        for s in 0..ns {
            let a = alpha[t * ns + s];
            for u in 0..nb {
                x[s * nb + u] = a + gamma[(t * ns + s) * nb + u];
            }
        }
        reduce(algorithm, &x, |i| next[i], &mut acc, &mut alpha[(t + 1) * ns..(t + 2) * ns]);
    }
    let mut beta = vec![ninf; (total + 1) * ns];
    match termination {
        Termination::Terminated => beta[total * ns] = 0.0,
        Termination::Truncated => beta[total * ns..].iter_mut().for_each(|x| *x = 0.0),
    }
    for t in (0..total).rev() {
        for (i, xi) in x.iter_mut().enumerate() {
            *xi = gamma[t * ns * nb + i] + beta[(t + 1) * ns + next[i]];
        }
        reduce(algorithm, &x, |i| i / nb, &mut acc, &mut beta[t * ns..(t + 1) * ns]);
    }

    let mut post_info = vec![0.0; steps * k];
    let mut post_coded = vec![0.0; total * n];
    // Posteriors: branch metrics are referenced to the step maximum so the
    // exact variant needs one exponential per branch.
    let mut m = vec![ninf; ns * nb];
    let mut info_sum = vec![[0.0f64; 2]; k];
    let mut coded_sum = vec![[0.0f64; 2]; n];
    for t in 0..total {
        let mut top = ninf;
        for s in 0..ns {
            let a = alpha[t * ns + s];
            for u in 0..nb {
                let i = s * nb + u;
                m[i] = a + gamma[(t * ns + s) * nb + u] + beta[(t + 1) * ns + next[i]];
                top = top.max(m[i]);
            }
        }
        let init = match algorithm {
            Algorithm::LogMap => 0.0,
            Algorithm::MaxLogMap => ninf,
        };
        info_sum.iter_mut().for_each(|x| *x = [init; 2]);
        coded_sum.iter_mut().for_each(|x| *x = [init; 2]);
        for (i, &mi) in m.iter().enumerate() {
            if mi == ninf {
                continue;
            }
            let (u, o) = (i % nb, out[i] as usize);
            let info = t < steps;
            match algorithm {
                Algorithm::LogMap => {
                    let w = (mi - top).exp();
                    if info {
                        for (j, x) in info_sum.iter_mut().enumerate() {
                            x[(u >> (k - 1 - j)) & 1] += w;
                        }
                    }
                    for (j, x) in coded_sum.iter_mut().enumerate() {
                        x[(o >> (n - 1 - j)) & 1] += w;
                    }
                }
                Algorithm::MaxLogMap => {
                    if info {
                        for (j, x) in info_sum.iter_mut().enumerate() {
                            let c = &mut x[(u >> (k - 1 - j)) & 1];
                            *c = c.max(mi);
                        }
                    }
                    for (j, x) in coded_sum.iter_mut().enumerate() {
                        let c = &mut x[(o >> (n - 1 - j)) & 1];
                        *c = c.max(mi);
                    }
                }
            }
        }
        let llr = |x: &[f64; 2]| match algorithm {
            Algorithm::LogMap => llr_of(x[1].ln(), x[0].ln(), clamp),
            Algorithm::MaxLogMap => llr_of(x[1], x[0], clamp),
        };
        if t < steps {
            for (j, x) in info_sum.iter().enumerate() {
                post_info[t * k + j] = llr(x);
            }
        }
        for (j, x) in coded_sum.iter().enumerate() {
            post_coded[t * n + j] = llr(x);
        }
    }
    let extrinsic_info = post_info.iter().zip(&la).map(|(p, a)| (p - a).clamp(-clamp, clamp)).collect();
    let extrinsic_coded = post_coded.iter().zip(&lc).map(|(p, c)| (p - c).clamp(-clamp, clamp)).collect();
    Ok(SisoOutput {
        extrinsic_info,
        extrinsic_coded,
        posterior_info: post_info,
    })
}

/// Combine branch metrics `x` into per-state metrics `dst` (log-sum or max
/// over branches sharing `state(i)`), then shift so the best state is zero.
fn reduce(alg: Algorithm, x: &[f64], state: impl Fn(usize) -> usize, acc: &mut [f64], dst: &mut [f64]) {
    let ninf = f64::NEG_INFINITY;
    let top = x.iter().copied().fold(ninf, f64::max);
    if top == ninf {
        dst.fill(ninf);
        return;
    }
    match alg {
        Algorithm::LogMap => {
            acc.fill(0.0);
            for (i, &xi) in x.iter().enumerate() {
                if xi > ninf {
                    acc[state(i)] += (xi - top).exp();
                }
            }
            for (d, a) in dst.iter_mut().zip(acc.iter()) {
                *d = a.ln();
            }
            let m = dst.iter().copied().fold(ninf, f64::max);
            dst.iter_mut().for_each(|d| *d -= m);
        }
        Algorithm::MaxLogMap => {
            dst.fill(ninf);
            for (i, &xi) in x.iter().enumerate() {
                let d = &mut dst[state(i)];
                *d = d.max(xi - top);
            }
        }
    }
}

fn llr_of(one: f64, zero: f64, clamp: f64) -> f64 {
    let big = 2.0 * clamp;
    match (one == f64::NEG_INFINITY, zero == f64::NEG_INFINITY) {
        (true, true) => 0.0,
        (true, false) => -big,
        (false, true) => big,
        (false, false) => (one - zero).clamp(-big, big),
    }
}

/// A permutation `out[i] = in[map[i]]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    map: Vec<usize>,
}

impl Permutation {
    pub fn new(map: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; map.len()];
        for &m in &map {
            if m >= map.len() || std::mem::replace(&mut seen[m], true) {
                return Err(Error::Input("interleaver map is not a bijection".into()));
            }
        }
        Ok(Self { map })
    }

    pub fn identity(len: usize) -> Self {
        Self { map: (0..len).collect() }
    }

    /// Uniformly random permutation (Fisher-Yates).
    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        let mut map: Vec<usize> = (0..len).collect();
        map.shuffle(rng);
        Self { map }
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.map
    }

    pub fn permute<T: Copy>(&self, x: &[T]) -> Vec<T> {
        self.map.iter().map(|&m| x[m]).collect()
    }

    pub fn depermute<T: Copy + Default>(&self, y: &[T]) -> Vec<T> {
        let mut out = vec![T::default(); y.len()];
        for (i, &m) in self.map.iter().enumerate() {
            out[m] = y[i];
        }
        out
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.map.len()];
        for (i, &m) in self.map.iter().enumerate() {
            inv[m] = i;
        }
        Self { map: inv }
    }
}

/// Interleavers of one frame. PCCC uses `pi1`, SCCC uses `pi2`, HCTC both.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interleavers {
    pub pi1: Option<Permutation>,
    pub pi2: Option<Permutation>,
}

/// Encoder and frame layout of a concatenated scheme.
///
/// Channel serialisation: PCCC sends the first codeword then the second
/// encoder's parity; SCCC sends the inner codeword; HCTC sends the parallel
/// parity block first, then the inner codeword. Tails are included, and the
/// second interleaver spans the outer codeword with its tail.
#[derive(Debug, Clone)]
pub struct ConcatCodec {
    pub scheme: ConcatScheme,
    parts: Parts,
}

#[derive(Debug, Clone)]
struct Coded {
    trellis: Trellis,
    termination: Termination,
}

impl Coded {
    fn coded_len(&self, info_len: usize) -> usize {
        self.trellis.coded_len(info_len, self.termination)
    }
}

#[derive(Debug, Clone)]
enum Parts {
    Pccc { first: Coded, second: Coded },
    Sccc { outer: Coded, inner: Coded },
    Hctc { parallel: Coded, outer: Coded, inner: Coded },
}

impl ConcatCodec {
    pub fn new(scheme: &ConcatScheme) -> Result<Self> {
        let c = |spec: &crate::trellis::ConvCodeSpec| -> Result<Coded> {
            Ok(Coded {
                trellis: spec.build_trellis()?,
                termination: spec.termination,
            })
        };
        let parts = match &scheme.layout {
            Layout::Pccc { first, second } => Parts::Pccc {
                first: c(first)?,
                second: Coded {
                    trellis: second.build_trellis()?.parity_only()?,
                    termination: second.termination,
                },
            },
            Layout::Sccc { outer, inner } => Parts::Sccc {
                outer: c(outer)?,
                inner: c(inner)?,
            },
            Layout::Hctc { parallel, outer, inner } => Parts::Hctc {
                parallel: Coded {
                    trellis: parallel.build_trellis()?.parity_only()?,
                    termination: parallel.termination,
                },
                outer: c(outer)?,
                inner: c(inner)?,
            },
        };
        let codec = Self {
            scheme: scheme.clone(),
            parts,
        };
        if let Some(len) = codec.pi2_len() {
            let k_i = match &codec.parts {
                Parts::Sccc { inner, .. } | Parts::Hctc { inner, .. } => inner.trellis.k_in(),
                Parts::Pccc { .. } => 1,
            };
            if len % k_i != 0 {
                return Err(Error::Config(format!(
                    "outer codeword of {len} bits does not split into inner inputs of {k_i}"
                )));
            }
        }
        Ok(codec)
    }

    pub fn kind(&self) -> SchemeKind {
        self.scheme.kind()
    }

    pub fn info_len(&self) -> usize {
        self.scheme.n1
    }

    pub fn pi1_len(&self) -> Option<usize> {
        match self.parts {
            Parts::Sccc { .. } => None,
            _ => Some(self.scheme.n1),
        }
    }

    pub fn pi2_len(&self) -> Option<usize> {
        match &self.parts {
            Parts::Pccc { .. } => None,
            Parts::Sccc { outer, .. } | Parts::Hctc { outer, .. } => Some(outer.coded_len(self.scheme.n1)),
        }
    }

    /// Number of bits sent on the channel per frame.
    pub fn channel_len(&self) -> usize {
        let n1 = self.scheme.n1;
        match &self.parts {
            Parts::Pccc { first, second } => first.coded_len(n1) + second.coded_len(n1),
            Parts::Sccc { inner, .. } => inner.coded_len(self.pi2_len().unwrap_or(0)),
            Parts::Hctc { parallel, inner, .. } => {
                parallel.coded_len(n1) + inner.coded_len(self.pi2_len().unwrap_or(0))
            }
        }
    }

    /// Information bits per channel bit, tails included.
    pub fn effective_rate(&self) -> f64 {
        self.scheme.n1 as f64 / self.channel_len() as f64
    }

    /// `d_f` of the outer code, where there is one.
    pub fn outer_free_distance(&self) -> Option<u32> {
        match &self.parts {
            Parts::Sccc { outer, .. } | Parts::Hctc { outer, .. } => {
                outer.trellis.free_distance(crate::trellis::SearchLimits::default()).ok()
            }
            Parts::Pccc { .. } => None,
        }
    }

    fn check_interleavers(&self, il: &Interleavers) -> Result<()> {
        let chk = |want: Option<usize>, got: &Option<Permutation>, name: &str| -> Result<()> {
            match (want, got) {
                (Some(w), Some(p)) if p.len() == w => Ok(()),
                (Some(w), Some(p)) => Err(Error::Input(format!("{name} has length {}, frame needs {w}", p.len()))),
                (Some(w), None) => Err(Error::Input(format!("{name} of length {w} missing"))),
                (None, _) => Ok(()),
            }
        };
        chk(self.pi1_len(), &il.pi1, "first interleaver")?;
        chk(self.pi2_len(), &il.pi2, "second interleaver")
    }

    pub fn encode(&self, info: &[u8], il: &Interleavers) -> Result<Vec<u8>> {
        if info.len() != self.scheme.n1 {
            return Err(Error::Input(format!(
                "frame needs {} information bits, got {}",
                self.scheme.n1,
                info.len()
            )));
        }
        self.check_interleavers(il)?;
        let enc = |c: &Coded, x: &[u8]| c.trellis.encode(x, c.termination).map(|w| w.bits);
        Ok(match &self.parts {
            Parts::Pccc { first, second } => {
                let mut out = enc(first, info)?;
                out.extend(enc(second, &il.pi1.as_ref().unwrap().permute(info))?);
                out
            }
            Parts::Sccc { outer, inner } => {
                let o = enc(outer, info)?;
                enc(inner, &il.pi2.as_ref().unwrap().permute(&o))?
            }
            Parts::Hctc { parallel, outer, inner } => {
                let mut out = enc(parallel, &il.pi1.as_ref().unwrap().permute(info))?;
                let o = enc(outer, info)?;
                out.extend(enc(inner, &il.pi2.as_ref().unwrap().permute(&o))?);
                out
            }
        })
    }

    pub fn decode(&self, channel: &[f64], il: &Interleavers, cfg: &DecodeConfig) -> Result<DecodeTrace> {
        match self.kind() {
            SchemeKind::Pccc => decode_pccc(channel, self, il, cfg),
            SchemeKind::Sccc => decode_sccc(channel, self, il, cfg),
            SchemeKind::Hctc => decode_hctc(channel, self, il, cfg),
        }
    }
}

/// Posterior LLRs on the information bits after each iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeTrace {
    pub posteriors: Vec<Vec<f64>>,
}

impl DecodeTrace {
    /// Hard decisions after the final iteration.
    pub fn decisions(&self) -> Vec<u8> {
        self.posteriors.last().map(|p| hard_decisions(p)).unwrap_or_default()
    }

    /// Hard decisions after iteration `it` (1-based).
    pub fn decisions_at(&self, it: usize) -> Vec<u8> {
        hard_decisions(&self.posteriors[it - 1])
    }

    /// CSV with columns `iteration,bit,llr`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "iteration,bit,llr")?;
        for (it, p) in self.posteriors.iter().enumerate() {
            for (i, l) in p.iter().enumerate() {
                writeln!(out, "{},{i},{l}", it + 1)?;
            }
        }
        Ok(())
    }
}

fn prepare<'a>(channel: &'a [f64], codec: &ConcatCodec, il: &Interleavers, cfg: &DecodeConfig) -> Result<&'a [f64]> {
    cfg.validate()?;
    codec.check_interleavers(il)?;
    if channel.len() != codec.channel_len() {
        return Err(Error::Input(format!(
            "frame needs {} channel LLRs, got {}",
            codec.channel_len(),
            channel.len()
        )));
    }
    Ok(channel)
}

fn siso(c: &Coded, channel: &[f64], apriori: &[f64], cfg: &DecodeConfig) -> Result<SisoOutput> {
    let mut out = siso_decode(&c.trellis, c.termination, channel, apriori, cfg.algorithm, cfg.clamp)?;
    if cfg.extrinsic_scale != 1.0 {
        let f = cfg.extrinsic_scale;
        out.extrinsic_info.iter_mut().for_each(|x| *x *= f);
        out.extrinsic_coded.iter_mut().for_each(|x| *x *= f);
    }
    Ok(out)
}

/// Turbo schedule: decoder 1 sees the full first codeword, decoder 2 the
/// second encoder's parity; they exchange extrinsic information on the info
/// bits through the interleaver.
pub fn decode_pccc(channel: &[f64], codec: &ConcatCodec, il: &Interleavers, cfg: &DecodeConfig) -> Result<DecodeTrace> {
    let channel = prepare(channel, codec, il, cfg)?;
    let Parts::Pccc { first, second } = &codec.parts else {
        return Err(Error::Input("codec is not a PCCC".into()));
    };
    let pi = il.pi1.as_ref().unwrap();
    let n1 = codec.info_len();
    let (ch1, ch2) = channel.split_at(first.coded_len(n1));
    let mut ext2 = vec![0.0; n1];
    let mut posteriors = Vec::with_capacity(cfg.iterations);
    for _ in 0..cfg.iterations {
        let d1 = siso(first, ch1, &ext2, cfg)?;
        let d2 = siso(second, ch2, &pi.permute(&d1.extrinsic_info), cfg)?;
        ext2 = pi.depermute(&d2.extrinsic_info);
        posteriors.push(pi.depermute(&d2.posterior_info));
    }
    Ok(DecodeTrace { posteriors })
}

/// Serial schedule: inner SISO, de-interleave, outer SISO, with the outer
/// coded-bit extrinsic fed back as the inner a-priori.
pub fn decode_sccc(channel: &[f64], codec: &ConcatCodec, il: &Interleavers, cfg: &DecodeConfig) -> Result<DecodeTrace> {
    let channel = prepare(channel, codec, il, cfg)?;
    let Parts::Sccc { outer, inner } = &codec.parts else {
        return Err(Error::Input("codec is not an SCCC".into()));
    };
    let pi = il.pi2.as_ref().unwrap();
    let zeros = vec![0.0; codec.info_len()];
    let mut to_inner = vec![0.0; pi.len()];
    let mut posteriors = Vec::with_capacity(cfg.iterations);
    for _ in 0..cfg.iterations {
        let di = siso(inner, channel, &to_inner, cfg)?;
        let d_o = siso(outer, &pi.depermute(&di.extrinsic_info), &zeros, cfg)?;
        to_inner = pi.permute(&d_o.extrinsic_coded);
        posteriors.push(d_o.posterior_info);
    }
    Ok(DecodeTrace { posteriors })
}

/// HCTC schedule. With [`Schedule::SerialFirst`] one iteration runs the inner
/// SISO, the outer SISO (a-priori from the parallel branch), then the
/// parallel SISO on the interleaved serial extrinsic; the decision combines
/// both branches.
pub fn decode_hctc(channel: &[f64], codec: &ConcatCodec, il: &Interleavers, cfg: &DecodeConfig) -> Result<DecodeTrace> {
    let channel = prepare(channel, codec, il, cfg)?;
    let Parts::Hctc { parallel, outer, inner } = &codec.parts else {
        return Err(Error::Input("codec is not an HCTC".into()));
    };
    let pi1 = il.pi1.as_ref().unwrap();
    let pi2 = il.pi2.as_ref().unwrap();
    let n1 = codec.info_len();
    let (ch_p, ch_i) = channel.split_at(parallel.coded_len(n1));
    let mut from_par = vec![0.0; n1];
    let mut to_inner = vec![0.0; pi2.len()];
    let mut posteriors = Vec::with_capacity(cfg.iterations);
    for _ in 0..cfg.iterations {
        match cfg.schedule {
            Schedule::SerialFirst => {
                let di = siso(inner, ch_i, &to_inner, cfg)?;
                let d_o = siso(outer, &pi2.depermute(&di.extrinsic_info), &from_par, cfg)?;
                to_inner = pi2.permute(&d_o.extrinsic_coded);
                let dp = siso(parallel, ch_p, &pi1.permute(&d_o.extrinsic_info), cfg)?;
                from_par = pi1.depermute(&dp.extrinsic_info);
                posteriors.push(pi1.depermute(&dp.posterior_info));
            }
            Schedule::ParallelFirst => {
                // The serial-branch extrinsic from the previous pass is
                // recovered as posterior minus what the parallel branch sent.
                let serial_ext: Vec<f64> = match posteriors.last() {
                    Some(p) => p.iter().zip(&from_par).map(|(a, b): (&f64, &f64)| a - b).collect(),
                    None => vec![0.0; n1],
                };
                let dp = siso(parallel, ch_p, &pi1.permute(&serial_ext), cfg)?;
                from_par = pi1.depermute(&dp.extrinsic_info);
                let di = siso(inner, ch_i, &to_inner, cfg)?;
                let d_o = siso(outer, &pi2.depermute(&di.extrinsic_info), &from_par, cfg)?;
                to_inner = pi2.permute(&d_o.extrinsic_coded);
                posteriors.push(d_o.posterior_info);
            }
        }
    }
    Ok(DecodeTrace { posteriors })
}
