//! Complex-baseband CPFSK modulation, AWGN/Rayleigh channel and the coherent
//! MSK soft demodulator.
//!
//! MSK is handled in its offset-quadrature form. Data bit `j` becomes an
//! antipodal symbol on a half-sine pulse spanning slots `j` and `j + 1`; even
//! `j` ride the quadrature rail, odd `j` the in-phase rail, and a fixed `+1`
//! occupies the in-phase rail before the frame. [`precode`] turns data bits
//! into the `n + 1` frequency bits whose CPFSK waveform is exactly that rail
//! signal, so the rail correlator in [`demodulate_llr`] sees antipodal
//! symbols with error rate `Q(sqrt(2 Eb/N0))`.

use crate::error::{Error, Result};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use std::f64::consts::PI;
use std::io::{self, Write};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModemConfig {
    pub mod_index: f64,
    pub samples_per_symbol: usize,
    pub eb: f64,
    pub tb: f64,
    pub theta0: f64,
}

impl Default for ModemConfig {
    fn default() -> Self {
        Self {
            mod_index: 0.5,
            samples_per_symbol: 8,
            eb: 1.0,
            tb: 1.0,
            theta0: 0.0,
        }
    }
}

impl ModemConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mod_index > 0.0) || !self.mod_index.is_finite() {
            return Err(Error::Config(format!("mod_index must be positive, got {}", self.mod_index)));
        }
        if self.samples_per_symbol < 2 {
            return Err(Error::Config("samples_per_symbol must be at least 2".into()));
        }
        if !(self.eb > 0.0) || !(self.tb > 0.0) {
            return Err(Error::Config("Eb and Tb must be positive".into()));
        }
        Ok(())
    }

    pub fn is_msk(&self) -> bool {
        (self.mod_index - 0.5).abs() < 1e-12
    }

    /// Envelope `sqrt(2 Eb / Tb)`.
    pub fn amplitude(&self) -> f64 {
        (2.0 * self.eb / self.tb).sqrt()
    }

    /// Tone spacing `mod_index / Tb`; `1 / (2 Tb)` for MSK.
    pub fn tone_spacing(&self) -> f64 {
        self.mod_index / self.tb
    }

    /// Baseband frequency offset of a bit's tone around the carrier.
    pub fn frequency_offset(&self, bit: u8) -> f64 {
        let s = if bit & 1 == 1 { 1.0 } else { -1.0 };
        s * self.tone_spacing() / 2.0
    }

    fn dt(&self) -> f64 {
        self.tb / self.samples_per_symbol as f64
    }
}

/// Modulated waveform. Samples sit at the midpoints of `samples_per_symbol`
/// equal sub-intervals of each bit slot.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseTrajectory {
    pub samples: Vec<Complex64>,
    /// Phase at each slot boundary, `theta0` first.
    pub phase: Vec<f64>,
    pub config: ModemConfig,
}

impl PhaseTrajectory {
    pub fn slots(&self) -> usize {
        self.phase.len() - 1
    }

    /// Passband energy of slot `k`, `(1/2) * sum |s|^2 dt`.
    pub fn slot_energy(&self, k: usize) -> f64 {
        let sps = self.config.samples_per_symbol;
        0.5 * self.samples[k * sps..(k + 1) * sps].iter().map(|s| s.norm_sqr()).sum::<f64>() * self.config.dt()
    }

    /// CSV dump with columns `t,I,Q,theta`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "t,I,Q,theta")?;
        let dt = self.config.dt();
        for (i, s) in self.samples.iter().enumerate() {
            let t = (i as f64 + 0.5) * dt;
            writeln!(out, "{t},{},{},{}", s.re, s.im, s.arg())?;
        }
        Ok(())
    }
}

/// CPFSK modulation of frequency bits: bit 1 advances the phase by
/// `pi * mod_index` over its slot, bit 0 retards it by the same amount.
pub fn modulate(bits: &[u8], config: &ModemConfig) -> Result<PhaseTrajectory> {
    config.validate()?;
    if bits.is_empty() {
        return Err(Error::Input("nothing to modulate".into()));
    }
    let sps = config.samples_per_symbol;
    let amp = config.amplitude();
    let step = PI * config.mod_index;
    let mut samples = Vec::with_capacity(bits.len() * sps);
    let mut phase = Vec::with_capacity(bits.len() + 1);
    let mut theta = config.theta0;
    phase.push(theta);
    for &b in bits {
        let a = if b & 1 == 1 { 1.0 } else { -1.0 };
        for i in 0..sps {
            let tau = (i as f64 + 0.5) / sps as f64;
            samples.push(Complex64::from_polar(amp, theta + a * step * tau));
        }
        // Accumulate in units of the step to keep boundaries exact.
        theta += a * step;
        phase.push(theta);
    }
    Ok(PhaseTrajectory {
        samples,
        phase,
        config: *config,
    })
}

fn rail_sign(bit: u8) -> i8 {
    if bit & 1 == 1 {
        1
    } else {
        -1
    }
}

/// MSK precoder: data bits to the `n + 1` frequency bits that put data bit
/// `j` on rail symbol `j`. The last frequency bit closes the final pulse with
/// a `+1` dummy symbol.
pub fn precode(data: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(data.len() + 1);
    let mut prev: i8 = 1;
    for k in 0..=data.len() {
        let r = if k < data.len() { rail_sign(data[k]) } else { 1 };
        let a = if k % 2 == 0 { r * prev } else { -r * prev };
        out.push(u8::from(a > 0));
        prev = r;
    }
    out
}

/// Fading channel model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelKind {
    Awgn,
    Rayleigh,
}

/// How often the Rayleigh amplitude is redrawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FadingGranularity {
    /// Independent amplitude per data bit (per rail symbol for MSK).
    PerBit,
    /// One amplitude per block of this many data bits.
    Block(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelOutput {
    pub received: Vec<Complex64>,
    /// Fading amplitude per data bit (MSK) or per slot (other indices).
    pub csi: Vec<f64>,
    /// Per-dimension variance of each noise sample.
    pub noise_var: f64,
    pub config: ModemConfig,
}

/// Draw from the Rayleigh density `2 r exp(-r^2)`, which has `E[r^2] = 1`.
pub fn rayleigh_amplitude<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    (-(1.0 - u).ln()).sqrt()
}

fn draw_csi<R: Rng + ?Sized>(n: usize, kind: ChannelKind, gran: FadingGranularity, rng: &mut R) -> Result<Vec<f64>> {
    Ok(match kind {
        ChannelKind::Awgn => vec![1.0; n],
        ChannelKind::Rayleigh => {
            let block = match gran {
                FadingGranularity::PerBit => 1,
                FadingGranularity::Block(0) => return Err(Error::Config("fading block length must be positive".into())),
                FadingGranularity::Block(b) => b,
            };
            let mut v = Vec::with_capacity(n);
            while v.len() < n {
                let r = rayleigh_amplitude(rng);
                for _ in 0..block.min(n - v.len()) {
                    v.push(r);
                }
            }
            v
        }
    })
}

/// Fade and add noise. `ebn0_db = +inf` gives a noiseless channel.
///
/// For MSK the amplitude of data bit `j` scales its rail (its axis over slots
/// `j` and `j + 1`), so each data bit sees exactly one fading value; the
/// leading and closing dummy symbols are not faded. For other modulation
/// indices the whole sample is scaled once per slot.
pub fn apply_channel<R: Rng + ?Sized>(
    signal: &PhaseTrajectory,
    kind: ChannelKind,
    ebn0_db: f64,
    granularity: FadingGranularity,
    rng: &mut R,
) -> Result<ChannelOutput> {
    if ebn0_db.is_nan() || ebn0_db == f64::NEG_INFINITY {
        return Err(Error::Input(format!("Eb/N0 must be finite or +inf, got {ebn0_db}")));
    }
    let cfg = signal.config;
    let sps = cfg.samples_per_symbol;
    let slots = signal.slots();
    let msk = cfg.is_msk();
    let n_csi = if msk { slots.saturating_sub(1) } else { slots };
    let csi = draw_csi(n_csi, kind, granularity, rng)?;
    let mut received = signal.samples.clone();
    if kind == ChannelKind::Rayleigh {
        let c = Complex64::from_polar(1.0, -cfg.theta0);
        for k in 0..slots {
            if msk {
                // Rail starting at slot k and rail starting at slot k-1.
                let rho_k = csi.get(k).copied().unwrap_or(1.0);
                let rho_prev = if k == 0 { 1.0 } else { csi[k - 1] };
                let (rho_i, rho_q) = if k % 2 == 0 { (rho_prev, rho_k) } else { (rho_k, rho_prev) };
                for s in &mut received[k * sps..(k + 1) * sps] {
                    let z = *s * c;
                    *s = Complex64::new(z.re * rho_i, z.im * rho_q) / c;
                }
            } else {
                for s in &mut received[k * sps..(k + 1) * sps] {
                    *s *= csi[k];
                }
            }
        }
    }
    let noise_var = if ebn0_db == f64::INFINITY {
        0.0
    } else {
        let n0 = cfg.eb / 10f64.powf(ebn0_db / 10.0);
        n0 / cfg.dt()
    };
    if noise_var > 0.0 {
        let sd = noise_var.sqrt();
        for s in &mut received {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            *s += Complex64::new(sd * re, sd * im);
        }
    }
    Ok(ChannelOutput {
        received,
        csi,
        noise_var,
        config: cfg,
    })
}

/// LLR `ln P(1|r) / P(0|r)` per data bit from the MSK rail correlator,
/// weighted by the known amplitudes. A noiseless input yields `+-inf`
/// clamped to `+-1e6`.
pub fn demodulate_llr(output: &ChannelOutput) -> Result<Vec<f64>> {
    let cfg = output.config;
    if !cfg.is_msk() {
        return Err(Error::Config(format!(
            "coherent demodulation is implemented for MSK only, mod_index = {}",
            cfg.mod_index
        )));
    }
    let sps = cfg.samples_per_symbol;
    if output.received.len() % sps != 0 {
        return Err(Error::Input("received length is not a whole number of slots".into()));
    }
    let slots = output.received.len() / sps;
    if slots == 0 || output.csi.len() != slots - 1 {
        return Err(Error::Input(format!(
            "csi has {} entries for {} slots; expected one per data bit ({})",
            output.csi.len(),
            slots,
            slots.saturating_sub(1)
        )));
    }
    let dt = cfg.dt();
    let amp = cfg.amplitude();
    let derot = Complex64::from_polar(1.0, -cfg.theta0);
    let rise: Vec<f64> = (0..sps)
        .map(|i| (PI * (i as f64 + 0.5) / (2.0 * sps as f64)).sin())
        .collect();
    let fall: Vec<f64> = rise.iter().rev().copied().collect();
    let n = slots - 1;
    let mut llr = Vec::with_capacity(n);
    for j in 0..n {
        let on_q = j % 2 == 0;
        let comp = |z: Complex64| {
            let z = z * derot;
            if on_q {
                z.im
            } else {
                z.re
            }
        };
        let mut y = 0.0;
        for i in 0..sps {
            y += comp(output.received[j * sps + i]) * rise[i];
            y += comp(output.received[(j + 1) * sps + i]) * fall[i];
        }
        y *= dt;
        let rho = output.csi[j];
        let v = if output.noise_var > 0.0 {
            2.0 * rho * amp * y / (output.noise_var * dt)
        } else {
            y.signum() * 1e6
        };
        llr.push(v);
    }
    Ok(llr)
}
