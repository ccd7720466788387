//! Toolkit configuration: a TOML document of codes, schemes, bound settings
//! and experiment plans. Loading validates every cross-reference and builds
//! the core types once, so commands never see an unresolved id.

use hctc_core::decoder::{Algorithm, DecodeConfig, Schedule, DEFAULT_CLAMP};
use hctc_core::modem::{ChannelKind, FadingGranularity, ModemConfig};
use hctc_core::sim::{BoundOverlay, ExperimentPlan, InterleaverKind, LinkConfig, LinkScheme, StopRule};
use hctc_core::{ConcatScheme, ConvCodeSpec, PepForm, SpectrumConfig, SpectrumMethod, Termination};
use serde::Deserialize;
use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(default)]
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
    #[serde(default, rename = "code")]
    pub codes: Vec<RawCode>,
    #[serde(default, rename = "scheme")]
    pub schemes: Vec<RawScheme>,
    #[serde(default)]
    pub spectrum: RawSpectrum,
    #[serde(default)]
    pub modem: RawModem,
    #[serde(default)]
    pub decoder: RawDecoder,
    #[serde(default)]
    pub bound: RawBound,
    #[serde(default, rename = "plan")]
    pub plans: Vec<RawPlan>,
    pub compare: Option<RawCompare>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawCode {
    pub id: String,
    pub k_in: usize,
    pub n_out: usize,
    pub memory: usize,
    /// One row of octal polynomials per input.
    pub generators: Vec<Vec<String>>,
    #[serde(default)]
    pub feedback: Vec<String>,
    #[serde(default)]
    pub systematic: bool,
    #[serde(default)]
    pub termination: RawTermination,
}

#[derive(Debug, Clone, Copy, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum RawTermination {
    #[default]
    Terminated,
    Truncated,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum RawKind {
    Pccc,
    Sccc,
    Hctc,
    Uncoded,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawScheme {
    pub id: String,
    pub kind: RawKind,
    pub n1: usize,
    /// Optional check on the derived second interleaver length.
    pub n2: Option<usize>,
    pub first: Option<String>,
    pub second: Option<String>,
    pub parallel: Option<String>,
    pub outer: Option<String>,
    pub inner: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RawSpectrum {
    pub method: RawSpectrumMethod,
    pub w_max: u32,
    pub h_span: u32,
    pub j_max: u32,
    pub len_max: usize,
}

impl Default for RawSpectrum {
    fn default() -> Self {
        let d = SpectrumConfig::default();
        Self {
            method: RawSpectrumMethod::Events,
            w_max: d.w_max,
            h_span: d.h_span,
            j_max: d.j_max,
            len_max: d.len_max,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum RawSpectrumMethod {
    Events,
    Exact,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RawModem {
    pub mod_index: f64,
    pub samples_per_symbol: usize,
    pub theta0: f64,
    pub fading: RawFading,
    pub fading_block: usize,
}

impl Default for RawModem {
    fn default() -> Self {
        let d = ModemConfig::default();
        Self {
            mod_index: d.mod_index,
            samples_per_symbol: d.samples_per_symbol,
            theta0: d.theta0,
            fading: RawFading::PerBit,
            fading_block: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum RawFading {
    PerBit,
    Block,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RawDecoder {
    pub iterations: usize,
    pub algorithm: RawAlgorithm,
    pub clamp: f64,
    pub schedule: RawSchedule,
    pub extrinsic_scale: f64,
}

impl Default for RawDecoder {
    fn default() -> Self {
        Self {
            iterations: 8,
            algorithm: RawAlgorithm::LogMap,
            clamp: DEFAULT_CLAMP,
            schedule: RawSchedule::SerialFirst,
            extrinsic_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum RawAlgorithm {
    LogMap,
    MaxLogMap,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum RawSchedule {
    SerialFirst,
    ParallelFirst,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum RawChannel {
    Awgn,
    Rayleigh,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum RawPep {
    Exact,
    Chernoff,
}

/// An SNR grid, either listed or as an inclusive range.
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum RawGrid {
    List(Vec<f64>),
    Range { start: f64, stop: f64, step: f64 },
}

impl RawGrid {
    pub fn points(&self) -> Result<Vec<f64>, CliError> {
        match self {
            RawGrid::List(v) => {
                if v.iter().any(|x| x.is_nan()) {
                    return Err(CliError::Config("SNR grid contains NaN".into()));
                }
                Ok(v.clone())
            }
            &RawGrid::Range { start, stop, step } => {
                if !(step > 0.0) || !start.is_finite() || !stop.is_finite() || stop < start {
                    return Err(CliError::Config(format!("bad SNR range {start}..{stop} step {step}")));
                }
                let n = ((stop - start) / step + 1e-9).floor() as usize;
                // Rounded to 1e-9 dB so the grid prints cleanly.
                Ok((0..=n).map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9).collect())
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RawBound {
    pub snr_db: RawGrid,
    pub channels: Vec<RawChannel>,
    pub awgn_pep: RawPep,
    pub rayleigh_pep: RawPep,
    pub asymptotic: bool,
    /// Optional sweep of N1 values; empty keeps the scheme's own.
    pub n1: Vec<usize>,
}

impl Default for RawBound {
    fn default() -> Self {
        Self {
            snr_db: RawGrid::Range {
                start: 0.0,
                stop: 10.0,
                step: 0.5,
            },
            channels: vec![RawChannel::Awgn, RawChannel::Rayleigh],
            awgn_pep: RawPep::Exact,
            rayleigh_pep: RawPep::Chernoff,
            asymptotic: true,
            n1: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawStop {
    #[serde(default = "default_min_errors")]
    pub min_bit_errors: u64,
    #[serde(default = "default_max_bits")]
    pub max_bits: u64,
    pub max_frames: Option<u64>,
}

fn default_min_errors() -> u64 {
    100
}

fn default_max_bits() -> u64 {
    10_000_000
}

impl Default for RawStop {
    fn default() -> Self {
        Self {
            min_bit_errors: default_min_errors(),
            max_bits: default_max_bits(),
            max_frames: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum RawInterleaver {
    Uniform,
    Identity,
    Fixed { seed: u64 },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawPlan {
    pub id: String,
    pub schemes: Vec<String>,
    /// Sweep of N1; empty keeps each scheme's own.
    #[serde(default)]
    pub n1: Vec<usize>,
    #[serde(default = "default_channels")]
    pub channels: Vec<RawChannel>,
    pub snr_db: RawGrid,
    pub iterations: Option<usize>,
    #[serde(default)]
    pub report_iterations: Vec<usize>,
    #[serde(default)]
    pub stop: RawStop,
    pub interleaver: Option<RawInterleaver>,
    #[serde(default)]
    pub bounds: bool,
}

fn default_channels() -> Vec<RawChannel> {
    vec![RawChannel::Awgn]
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawCompare {
    pub schemes: Vec<String>,
    pub n1: usize,
    pub snr_db: RawGrid,
    #[serde(default)]
    pub stop: RawStop,
    pub iterations: Option<usize>,
}

/// A validated configuration with every id resolved.
#[derive(Debug, Clone)]
pub struct ToolkitConfig {
    pub path: PathBuf,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub codes: BTreeMap<String, ConvCodeSpec>,
    pub schemes: BTreeMap<String, SchemeEntry>,
    pub spectrum: SpectrumConfig,
    pub modem: ModemConfig,
    pub fading: FadingGranularity,
    pub decode: DecodeConfig,
    pub bound: BoundSettings,
    pub plans: BTreeMap<String, RawPlan>,
    pub compare: Option<RawCompare>,
}

#[derive(Debug, Clone)]
pub enum SchemeEntry {
    Coded(ConcatScheme),
    Uncoded { id: String, frame_bits: usize },
}

impl SchemeEntry {
    pub fn id(&self) -> &str {
        match self {
            SchemeEntry::Coded(s) => &s.id,
            SchemeEntry::Uncoded { id, .. } => id,
        }
    }

    pub fn with_n1(&self, n1: usize) -> Result<Self, CliError> {
        Ok(match self {
            SchemeEntry::Coded(s) => SchemeEntry::Coded(s.with_n1(n1)?),
            SchemeEntry::Uncoded { id, .. } => SchemeEntry::Uncoded {
                id: id.clone(),
                frame_bits: n1,
            },
        })
    }
}

#[derive(Debug, Clone)]
pub struct BoundSettings {
    pub snr_db: Vec<f64>,
    pub channels: Vec<ChannelKind>,
    pub awgn_pep: PepForm,
    pub rayleigh_pep: PepForm,
    pub asymptotic: bool,
    pub n1: Vec<usize>,
}

fn channel(c: RawChannel) -> ChannelKind {
    match c {
        RawChannel::Awgn => ChannelKind::Awgn,
        RawChannel::Rayleigh => ChannelKind::Rayleigh,
    }
}

pub fn channels(v: &[RawChannel]) -> Vec<ChannelKind> {
    v.iter().map(|&c| channel(c)).collect()
}

fn pep(p: RawPep) -> PepForm {
    match p {
        RawPep::Exact => PepForm::Exact,
        RawPep::Chernoff => PepForm::Chernoff,
    }
}

fn unique<'a>(what: &str, ids: impl Iterator<Item = &'a str>) -> Result<(), CliError> {
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(CliError::Config(format!("duplicate {what} id '{id}'")));
        }
    }
    Ok(())
}

impl ToolkitConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self, CliError> {
        let raw: RawConfig =
            toml::from_str(text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::resolve(raw, path)
    }

    fn resolve(raw: RawConfig, path: &Path) -> Result<Self, CliError> {
        unique("code", raw.codes.iter().map(|c| c.id.as_str()))?;
        unique("scheme", raw.schemes.iter().map(|s| s.id.as_str()))?;
        unique("plan", raw.plans.iter().map(|p| p.id.as_str()))?;

        let mut codes = BTreeMap::new();
        for c in &raw.codes {
            let rows: Vec<Vec<&str>> = c.generators.iter().map(|r| r.iter().map(String::as_str).collect()).collect();
            let rows: Vec<&[&str]> = rows.iter().map(Vec::as_slice).collect();
            let fb: Vec<&str> = c.feedback.iter().map(String::as_str).collect();
            let term = match c.termination {
                RawTermination::Terminated => Termination::Terminated,
                RawTermination::Truncated => Termination::Truncated,
            };
            let spec = ConvCodeSpec::from_octal(c.k_in, c.n_out, c.memory, &rows, &fb, c.systematic, term)
                .map_err(|e| CliError::Config(format!("code '{}': {e}", c.id)))?;
            codes.insert(c.id.clone(), spec);
        }

        let code = |scheme: &str, role: &str, id: &Option<String>| -> Result<ConvCodeSpec, CliError> {
            let id = id
                .as_ref()
                .ok_or_else(|| CliError::Config(format!("scheme '{scheme}' needs a '{role}' code")))?;
            codes
                .get(id)
                .cloned()
                .ok_or_else(|| CliError::Config(format!("scheme '{scheme}': unknown code id '{id}' for {role}")))
        };
        let mut schemes = BTreeMap::new();
        for s in &raw.schemes {
            let ctx = |e: hctc_core::Error| CliError::Config(format!("scheme '{}': {e}", s.id));
            let entry = match s.kind {
                RawKind::Pccc => SchemeEntry::Coded(
                    ConcatScheme::pccc(&s.id, code(&s.id, "first", &s.first)?, code(&s.id, "second", &s.second)?, s.n1)
                        .map_err(ctx)?,
                ),
                RawKind::Sccc => SchemeEntry::Coded(
                    ConcatScheme::sccc(&s.id, code(&s.id, "outer", &s.outer)?, code(&s.id, "inner", &s.inner)?, s.n1)
                        .map_err(ctx)?,
                ),
                RawKind::Hctc => SchemeEntry::Coded(
                    ConcatScheme::hctc(
                        &s.id,
                        code(&s.id, "parallel", &s.parallel)?,
                        code(&s.id, "outer", &s.outer)?,
                        code(&s.id, "inner", &s.inner)?,
                        s.n1,
                    )
                    .map_err(ctx)?,
                ),
                RawKind::Uncoded => {
                    if s.n1 == 0 {
                        return Err(CliError::Config(format!("scheme '{}': n1 must be positive", s.id)));
                    }
                    SchemeEntry::Uncoded {
                        id: s.id.clone(),
                        frame_bits: s.n1,
                    }
                }
            };
            if let (Some(want), SchemeEntry::Coded(c)) = (s.n2, &entry) {
                if want != c.n2 {
                    return Err(CliError::Config(format!(
                        "scheme '{}': n2 = {want} but the codes give N2 = {}",
                        s.id, c.n2
                    )));
                }
            }
            schemes.insert(s.id.clone(), entry);
        }

        let sp = &raw.spectrum;
        let spectrum = SpectrumConfig {
            method: match sp.method {
                RawSpectrumMethod::Events => SpectrumMethod::Events,
                RawSpectrumMethod::Exact => SpectrumMethod::Exact,
            },
            w_max: sp.w_max,
            h_span: sp.h_span,
            j_max: sp.j_max,
            len_max: sp.len_max,
            ..SpectrumConfig::default()
        };
        if spectrum.w_max == 0 || spectrum.j_max == 0 || spectrum.len_max == 0 {
            return Err(CliError::Config("spectrum limits must be positive".into()));
        }

        let modem = ModemConfig {
            mod_index: raw.modem.mod_index,
            samples_per_symbol: raw.modem.samples_per_symbol,
            theta0: raw.modem.theta0,
            ..ModemConfig::default()
        };
        modem.validate()?;
        let fading = match raw.modem.fading {
            RawFading::PerBit => FadingGranularity::PerBit,
            RawFading::Block if raw.modem.fading_block == 0 => {
                return Err(CliError::Config("fading_block must be positive".into()))
            }
            RawFading::Block => FadingGranularity::Block(raw.modem.fading_block),
        };

        let d = &raw.decoder;
        let decode = DecodeConfig {
            iterations: d.iterations,
            algorithm: match d.algorithm {
                RawAlgorithm::LogMap => Algorithm::LogMap,
                RawAlgorithm::MaxLogMap => Algorithm::MaxLogMap,
            },
            clamp: d.clamp,
            schedule: match d.schedule {
                RawSchedule::SerialFirst => Schedule::SerialFirst,
                RawSchedule::ParallelFirst => Schedule::ParallelFirst,
            },
            extrinsic_scale: d.extrinsic_scale,
        };
        decode.validate()?;

        let b = &raw.bound;
        let bound = BoundSettings {
            snr_db: b.snr_db.points()?,
            channels: channels(&b.channels),
            awgn_pep: pep(b.awgn_pep),
            rayleigh_pep: pep(b.rayleigh_pep),
            asymptotic: b.asymptotic,
            n1: b.n1.clone(),
        };

        let mut plans = BTreeMap::new();
        for p in &raw.plans {
            for id in &p.schemes {
                let s = schemes
                    .get(id)
                    .ok_or_else(|| CliError::Config(format!("plan '{}': unknown scheme id '{id}'", p.id)))?;
                for &n in &p.n1 {
                    s.with_n1(n)
                        .map_err(|e| CliError::Config(format!("plan '{}', scheme '{id}', N1 = {n}: {e}", p.id)))?;
                }
            }
            p.snr_db.points()?;
            if p.stop.min_bit_errors < 100 {
                log::warn!("plan '{}': min_bit_errors {} < 100; points will be flagged", p.id, p.stop.min_bit_errors);
            }
            if p.iterations == Some(0) {
                return Err(CliError::Config(format!("plan '{}': iterations must be at least 1", p.id)));
            }
            plans.insert(p.id.clone(), p.clone());
        }
        if let Some(c) = &raw.compare {
            for id in &c.schemes {
                match schemes.get(id) {
                    Some(SchemeEntry::Coded(s)) => {
                        s.with_n1(c.n1)
                            .map_err(|e| CliError::Config(format!("compare: scheme '{id}' at N1 = {}: {e}", c.n1)))?;
                    }
                    Some(SchemeEntry::Uncoded { .. }) => {
                        return Err(CliError::Config(format!("compare: scheme '{id}' is uncoded")))
                    }
                    None => return Err(CliError::Config(format!("compare: unknown scheme id '{id}'"))),
                }
            }
            c.snr_db.points()?;
        }

        Ok(Self {
            path: path.to_path_buf(),
            seed: raw.seed,
            out_dir: raw.out_dir.unwrap_or_else(|| PathBuf::from("out")),
            codes,
            schemes,
            spectrum,
            modem,
            fading,
            decode,
            bound,
            plans,
            compare: raw.compare,
        })
    }

    pub fn scheme(&self, id: &str) -> Result<&SchemeEntry, CliError> {
        self.schemes
            .get(id)
            .ok_or_else(|| CliError::Config(format!("unknown scheme id '{id}'")))
    }

    pub fn stop(raw: &RawStop) -> StopRule {
        StopRule {
            min_bit_errors: raw.min_bit_errors,
            max_bits: raw.max_bits,
            max_frames: raw.max_frames.unwrap_or(u64::MAX),
        }
    }

    pub fn link(&self, scheme: &SchemeEntry, ch: ChannelKind, stop: StopRule, iterations: Option<usize>) -> LinkConfig {
        let mut decode = self.decode;
        if let Some(it) = iterations {
            decode.iterations = it;
        }
        LinkConfig {
            id: scheme.id().to_string(),
            scheme: match scheme {
                SchemeEntry::Coded(s) => LinkScheme::Coded(s.clone()),
                SchemeEntry::Uncoded { frame_bits, .. } => LinkScheme::Uncoded { frame_bits: *frame_bits },
            },
            modem: self.modem,
            channel: ch,
            fading: self.fading,
            decode,
            interleaver: InterleaverKind::UniformRandomPerFrame,
            stop,
        }
    }

    /// Expand a plan into its cross-product of links.
    pub fn experiment(&self, plan_id: &str, seed: u64) -> Result<ExperimentPlan, CliError> {
        let p = self
            .plans
            .get(plan_id)
            .ok_or_else(|| CliError::Config(format!("unknown plan id '{plan_id}'")))?;
        let stop = Self::stop(&p.stop);
        let interleaver = match &p.interleaver {
            None | Some(RawInterleaver::Uniform) => InterleaverKind::UniformRandomPerFrame,
            Some(RawInterleaver::Identity) => InterleaverKind::Identity,
            Some(RawInterleaver::Fixed { seed }) => InterleaverKind::FixedSeeded(*seed),
        };
        let mut links = Vec::new();
        for id in &p.schemes {
            let base = self.scheme(id)?;
            let variants = if p.n1.is_empty() {
                vec![base.clone()]
            } else {
                p.n1.iter().map(|&n| base.with_n1(n)).collect::<Result<_, _>>()?
            };
            for s in &variants {
                for &ch in &channels(&p.channels) {
                    let mut l = self.link(s, ch, stop, p.iterations);
                    l.interleaver = interleaver;
                    links.push(l);
                }
            }
        }
        Ok(ExperimentPlan {
            id: p.id.clone(),
            links,
            snr_db: p.snr_db.points()?,
            seed,
            report_iterations: p.report_iterations.clone(),
            bounds: p.bounds.then(|| BoundOverlay {
                spectrum: self.spectrum,
                awgn_pep: self.bound.awgn_pep,
                rayleigh_pep: self.bound.rayleigh_pep,
            }),
        })
    }
}
