//! Monte Carlo link simulation: frames are generated, encoded, sent over the
//! CPFSK channel and decoded, with per-iteration error counts and Wilson
//! intervals.
//!
//! Each frame draws from its own ChaCha stream keyed by (seed, point) and
//! indexed by the frame number, and the stop rule is applied in frame order
//! over fixed-size batches, so results do not depend on the worker count.

use crate::bounds::{self, BoundCurve, ComponentSpectra, PepForm, SpectrumConfig};
use crate::decoder::{hard_decisions, ConcatCodec, DecodeConfig, Interleavers, Permutation};
use crate::error::{Error, Result};
use crate::modem::{apply_channel, demodulate_llr, modulate, precode, ChannelKind, FadingGranularity, ModemConfig};
use crate::scheme::ConcatScheme;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::fmt;
use std::io::{self, Write};
use std::time::Instant;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Frames simulated between stop-rule checks.
pub const BATCH_FRAMES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InterleaverKind {
    /// Fresh uniform permutation every frame.
    UniformRandomPerFrame,
    /// One permutation drawn from this seed and reused for every frame.
    FixedSeeded(u64),
    Identity,
}

pub fn make_interleaver<R: Rng + ?Sized>(kind: InterleaverKind, len: usize, rng: &mut R) -> Result<Permutation> {
    if len == 0 {
        return Err(Error::Input("interleaver length must be at least 1".into()));
    }
    Ok(match kind {
        InterleaverKind::UniformRandomPerFrame => Permutation::random(len, rng),
        InterleaverKind::FixedSeeded(seed) => {
            let mut r = ChaCha8Rng::seed_from_u64(seed ^ (len as u64).rotate_left(32));
            Permutation::random(len, &mut r)
        }
        InterleaverKind::Identity => Permutation::identity(len),
    })
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Stream for frame `frame` of the point identified by `(seed, point)`.
pub fn frame_rng(seed: u64, point: u64, frame: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    let mut s = splitmix(seed) ^ splitmix(point.wrapping_add(0x5851_F42D_4C95_7F2D));
    for chunk in key.chunks_mut(8) {
        s = splitmix(s);
        chunk.copy_from_slice(&s.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(frame);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StopRule {
    pub min_bit_errors: u64,
    pub max_bits: u64,
    pub max_frames: u64,
}

impl Default for StopRule {
    fn default() -> Self {
        Self {
            min_bit_errors: 100,
            max_bits: 10_000_000,
            max_frames: u64::MAX,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LinkScheme {
    /// Precoded MSK without coding, `frame_bits` per frame.
    Uncoded { frame_bits: usize },
    Coded(ConcatScheme),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkConfig {
    pub id: String,
    pub scheme: LinkScheme,
    pub modem: ModemConfig,
    pub channel: ChannelKind,
    pub fading: FadingGranularity,
    pub decode: DecodeConfig,
    pub interleaver: InterleaverKind,
    pub stop: StopRule,
}

impl fmt::Display for ChannelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChannelKind::Awgn => "AWGN",
            ChannelKind::Rayleigh => "Rayleigh",
        })
    }
}

/// Wilson score interval at 95%.
pub fn wilson_interval(errors: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = errors as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// One CSV row: a (config, SNR, iteration) estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct SimRow {
    pub scheme_id: String,
    pub n1: usize,
    pub n2: usize,
    pub channel: ChannelKind,
    pub ebn0_db: f64,
    pub iteration: usize,
    pub bits: u64,
    pub errors: u64,
    pub frames: u64,
    pub ber: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub seed: u64,
    pub d_f_outer: Option<u32>,
    /// Empty, or notes such as `low_errors` and `above_bound`.
    pub flag: String,
}

impl SimRow {
    pub const CSV_HEADER: &'static str =
        "scheme_id,N1,N2,channel,EbN0_dB,iteration,bits,errors,frames,ber,ci_lo,ci_hi,seed,d_f_outer,flag";

    pub fn write_csv_row<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{:.6e},{:.6e},{:.6e},{},{},{}",
            self.scheme_id,
            self.n1,
            self.n2,
            self.channel,
            self.ebn0_db,
            self.iteration,
            self.bits,
            self.errors,
            self.frames,
            self.ber,
            self.ci_lo,
            self.ci_hi,
            self.seed,
            self.d_f_outer.map(|d| d.to_string()).unwrap_or_default(),
            self.flag
        )
    }
}

pub fn write_sim_csv<W: Write>(rows: &[SimRow], mut out: W) -> io::Result<()> {
    writeln!(out, "{}", SimRow::CSV_HEADER)?;
    for r in rows {
        r.write_csv_row(&mut out)?;
    }
    Ok(())
}

/// Result of one SNR point: one row per decoder iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct PointResult {
    pub rows: Vec<SimRow>,
    pub wall_time_s: f64,
}

impl PointResult {
    pub fn last(&self) -> &SimRow {
        self.rows.last().expect("at least one iteration")
    }
}

/// Prepared link: codec plus the SNR offset from Eb/N0 to energy per channel bit.
struct Link<'a> {
    cfg: &'a LinkConfig,
    codec: Option<ConcatCodec>,
    info_len: usize,
    iterations: usize,
    rate_db: f64,
}

impl<'a> Link<'a> {
    fn new(cfg: &'a LinkConfig) -> Result<Self> {
        cfg.modem.validate()?;
        cfg.decode.validate()?;
        if !cfg.modem.is_msk() {
            return Err(Error::Config("simulation needs MSK (mod_index = 0.5) for coherent detection".into()));
        }
        match &cfg.scheme {
            LinkScheme::Uncoded { frame_bits } => {
                if *frame_bits == 0 {
                    return Err(Error::Config("uncoded frame must carry at least one bit".into()));
                }
                Ok(Self {
                    cfg,
                    codec: None,
                    info_len: *frame_bits,
                    iterations: 1,
                    rate_db: 0.0,
                })
            }
            LinkScheme::Coded(s) => {
                let codec = ConcatCodec::new(s)?;
                let rate_db = 10.0 * codec.effective_rate().log10();
                Ok(Self {
                    cfg,
                    info_len: s.n1,
                    iterations: cfg.decode.iterations,
                    rate_db,
                    codec: Some(codec),
                })
            }
        }
    }

    /// Bit errors after each iteration for one frame.
    fn frame(&self, ebn0_db: f64, rng: &mut ChaCha8Rng) -> Result<Vec<u64>> {
        let info: Vec<u8> = (0..self.info_len).map(|_| rng.random::<bool>() as u8).collect();
        let count = |dec: &[u8]| dec.iter().zip(&info).filter(|(a, b)| a != b).count() as u64;
        let esn0 = ebn0_db + self.rate_db;
        match &self.codec {
            None => {
                let llr = self.channel(&info, esn0, rng)?;
                Ok(vec![count(&hard_decisions(&llr))])
            }
            Some(codec) => {
                let il = Interleavers {
                    pi1: codec
                        .pi1_len()
                        .map(|n| make_interleaver(self.cfg.interleaver, n, rng))
                        .transpose()?,
                    pi2: codec
                        .pi2_len()
                        .map(|n| make_interleaver(self.cfg.interleaver, n, rng))
                        .transpose()?,
                };
                let tx = codec.encode(&info, &il)?;
                let llr = self.channel(&tx, esn0, rng)?;
                let trace = codec.decode(&llr, &il, &self.cfg.decode)?;
                Ok(trace.posteriors.iter().map(|p| count(&hard_decisions(p))).collect())
            }
        }
    }

    fn channel(&self, bits: &[u8], esn0_db: f64, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        let wave = modulate(&precode(bits), &self.cfg.modem)?;
        let out = apply_channel(&wave, self.cfg.channel, esn0_db, self.cfg.fading, rng)?;
        demodulate_llr(&out)
    }
}

/// Simulate one SNR point until the stop rule fires. `point` keys the
/// random streams; `threads = 0` uses the current rayon pool.
pub fn run_point(cfg: &LinkConfig, ebn0_db: f64, seed: u64, point: u64, threads: usize) -> Result<PointResult> {
    let start = Instant::now();
    let link = Link::new(cfg)?;
    let stop = cfg.stop;
    if stop.max_frames == 0 || stop.max_bits == 0 {
        return Err(Error::Config("stop rule must allow at least one frame".into()));
    }
    let body = || -> Result<(Vec<u64>, u64)> {
        let mut errors = vec![0u64; link.iterations];
        let mut frames = 0u64;
        'outer: loop {
            let batch: Vec<Result<Vec<u64>>> = (0..BATCH_FRAMES as u64)
                .into_par_iter()
                .map(|i| {
                    let f = frames + i;
                    let mut rng = frame_rng(seed, point, f);
                    link.frame(ebn0_db, &mut rng).map_err(|e| replay_error(e, seed, point, f))
                })
                .collect();
            for r in batch {
                let e = r?;
                for (acc, x) in errors.iter_mut().zip(&e) {
                    *acc += x;
                }
                frames += 1;
                let bits = frames * link.info_len as u64;
                if errors[link.iterations - 1] >= stop.min_bit_errors || bits >= stop.max_bits || frames >= stop.max_frames {
                    break 'outer;
                }
            }
        }
        Ok((errors, frames))
    };
    let (errors, frames) = if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Resource(e.to_string()))?
            .install(body)?
    } else {
        body()?
    };
    let bits = frames * link.info_len as u64;
    let (n1, n2, dfo) = match &link.codec {
        Some(c) => (c.scheme.n1, c.pi2_len().unwrap_or(c.scheme.n2), c.outer_free_distance()),
        None => (link.info_len, 0, None),
    };
    let rows = errors
        .iter()
        .enumerate()
        .map(|(i, &e)| {
            let (lo, hi) = wilson_interval(e, bits);
            SimRow {
                scheme_id: cfg.id.clone(),
                n1,
                n2,
                channel: cfg.channel,
                ebn0_db,
                iteration: i + 1,
                bits,
                errors: e,
                frames,
                ber: e as f64 / bits as f64,
                ci_lo: lo,
                ci_hi: hi,
                seed,
                d_f_outer: dfo,
                flag: if e < stop.min_bit_errors { "low_errors".into() } else { String::new() },
            }
        })
        .collect();
    let wall = start.elapsed().as_secs_f64();
    log::info!("{} at {ebn0_db} dB: {frames} frames in {wall:.2} s", cfg.id);
    Ok(PointResult { rows, wall_time_s: wall })
}

fn replay_error(e: Error, seed: u64, point: u64, frame: u64) -> Error {
    let ctx = format!(" (replay: seed {seed}, point {point}, frame {frame})");
    match e {
        Error::Config(m) => Error::Config(m + &ctx),
        Error::Input(m) => Error::Input(m + &ctx),
        Error::Dimension(m) => Error::Dimension(m + &ctx),
        Error::LimitExceeded(m) => Error::LimitExceeded(m + &ctx),
        Error::Resource(m) => Error::Resource(m + &ctx),
    }
}

/// Bound curves to overlay on simulated points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundOverlay {
    pub spectrum: SpectrumConfig,
    pub awgn_pep: PepForm,
    pub rayleigh_pep: PepForm,
}

impl Default for BoundOverlay {
    fn default() -> Self {
        Self {
            spectrum: SpectrumConfig::default(),
            awgn_pep: PepForm::Exact,
            rayleigh_pep: PepForm::Chernoff,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    pub id: String,
    pub links: Vec<LinkConfig>,
    pub snr_db: Vec<f64>,
    pub seed: u64,
    /// Iterations to report; empty reports all.
    pub report_iterations: Vec<usize>,
    pub bounds: Option<BoundOverlay>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PlanOutput {
    pub rows: Vec<SimRow>,
    pub bounds: Vec<BoundCurve>,
    /// `(scheme_id, EbN0, message)` for points that failed.
    pub failures: Vec<(String, f64, String)>,
}

impl PlanOutput {
    pub fn write_bounds_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{}", BoundCurve::CSV_HEADER)?;
        for b in &self.bounds {
            b.write_csv_rows(&mut out)?;
        }
        Ok(())
    }
}

/// Execute every (link, SNR) point. Failures are recorded and the plan
/// continues.
pub fn run_plan(plan: &ExperimentPlan, threads: usize) -> PlanOutput {
    let mut out = PlanOutput::default();
    if plan.snr_db.is_empty() {
        log::warn!("plan {} has an empty SNR grid", plan.id);
        return out;
    }
    for (li, link) in plan.links.iter().enumerate() {
        let mut curve = None;
        if let (Some(ov), LinkScheme::Coded(s)) = (&plan.bounds, &link.scheme) {
            match overlay(s, link.channel, ov, &plan.snr_db) {
                Ok(c) => curve = Some(c),
                Err(e) => out.failures.push((link.id.clone(), f64::NAN, format!("bound: {e}"))),
            }
        }
        let mut link_rows = Vec::new();
        for (si, &snr) in plan.snr_db.iter().enumerate() {
            let point = ((li as u64) << 32) | si as u64;
            match run_point(link, snr, plan.seed, point, threads) {
                Ok(r) => {
                    let keep = |it: usize| plan.report_iterations.is_empty() || plan.report_iterations.contains(&it);
                    link_rows.extend(r.rows.into_iter().filter(|row| keep(row.iteration)));
                }
                Err(e) => out.failures.push((link.id.clone(), snr, e.to_string())),
            }
        }
        if let Some(c) = &curve {
            flag_bound_violation(&mut link_rows, c);
            out.bounds.push(c.clone());
        }
        out.rows.extend(link_rows);
    }
    out
}

fn overlay(s: &ConcatScheme, ch: ChannelKind, ov: &BoundOverlay, grid: &[f64]) -> Result<BoundCurve> {
    let sp = ComponentSpectra::compute(s, &ov.spectrum)?;
    let iowc = sp.iowc(s)?;
    let (channel, pep) = match ch {
        ChannelKind::Awgn => (bounds::Channel::Awgn, ov.awgn_pep),
        ChannelKind::Rayleigh => (bounds::Channel::Rayleigh, ov.rayleigh_pep),
    };
    bounds::union_bound(&iowc, s, channel, pep, grid)
}

/// Mark the final-iteration row at the highest SNR with enough errors when
/// its BER exceeds the bound.
fn flag_bound_violation(rows: &mut [SimRow], curve: &BoundCurve) {
    let last_it = rows.iter().map(|r| r.iteration).max().unwrap_or(0);
    let idx = rows
        .iter()
        .enumerate()
        .filter(|(_, r)| r.iteration == last_it && r.flag.is_empty())
        .max_by(|a, b| a.1.ebn0_db.total_cmp(&b.1.ebn0_db))
        .map(|(i, _)| i);
    if let Some(i) = idx {
        let r = &rows[i];
        if let Some(p) = curve.points.iter().find(|p| p.ebn0_db == r.ebn0_db) {
            if r.ber > p.pb() {
                log::warn!("{} at {} dB: BER {:.3e} above bound {:.3e}", r.scheme_id, r.ebn0_db, r.ber, p.pb());
                rows[i].flag = "above_bound".into();
            }
        }
    }
}
