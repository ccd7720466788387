//! The four subcommands. Each builds its output in memory and writes one
//! file per artifact, so a failed command leaves no partial CSV behind.

use crate::config::{SchemeEntry, ToolkitConfig};
use crate::{ChannelArg, CliError, RunContext};
use hctc_core::modem::ChannelKind;
use hctc_core::sim::{run_plan, write_sim_csv, ExperimentPlan, SimRow};
use hctc_core::spectrum::{enumerate_error_events, events_to_block_iowc, exact_block_iowc, EventLimits, DEFAULT_CELL_BUDGET};
use hctc_core::{
    asymptotic_bound, union_bound, AsymptoticParams, BoundCurve, Channel, ComponentSpectra, ConcatScheme, ExponentScan,
    PepForm, SchemeKind, SearchLimits, SpectrumMethod, Termination,
};
use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    std::fs::write(&path, bytes).map_err(|e| CliError::Numeric(format!("cannot write {}: {e}", path.display())))?;
    log::info!("wrote {}", path.display());
    Ok(path)
}

fn term_name(t: Termination) -> &'static str {
    match t {
        Termination::Terminated => "terminated",
        Termination::Truncated => "truncated",
    }
}

/// Exact and event-approximated IOWC of one code, side by side. Cells outside
/// the event truncation leave the `events` column empty.
pub fn cmd_spectrum(cfg: &ToolkitConfig, ctx: &RunContext, code_id: &str, n: usize) -> Result<PathBuf, CliError> {
    let spec = cfg
        .codes
        .get(code_id)
        .ok_or_else(|| CliError::Config(format!("unknown code id '{code_id}'")))?;
    if n == 0 || n % spec.k_in != 0 {
        return Err(CliError::Config(format!(
            "N = {n} must be a positive multiple of k_in = {}",
            spec.k_in
        )));
    }
    let trellis = spec.build_trellis()?;
    let steps = n / spec.k_in;
    let coded = trellis.coded_len(n, spec.termination) as u32;
    let h_max = match trellis.free_distance(SearchLimits::default()) {
        Ok(d) => (d + cfg.spectrum.h_span).min(coded),
        Err(_) => coded,
    };
    let w_max = cfg.spectrum.w_max.min(n as u32);
    let exact = exact_block_iowc(&trellis, steps, spec.termination, Some((w_max, h_max)), DEFAULT_CELL_BUDGET)?;
    let events = enumerate_error_events(
        &trellis,
        EventLimits {
            w_max,
            h_max,
            len_max: cfg.spectrum.len_max,
        },
    );
    let approx = events_to_block_iowc(&events, steps, cfg.spectrum.j_max)?;

    let keys: BTreeSet<(u32, u32)> = exact
        .nonzero()
        .chain(approx.nonzero())
        .map(|(w, h, _)| (w, h))
        .filter(|&(w, _)| w > 0)
        .collect();
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# code={code_id} k_in={} n_out={} memory={} N={n} steps={steps} termination={} w_max={w_max} h_max={h_max} j_max={}",
        spec.k_in,
        spec.n_out,
        spec.memory,
        term_name(spec.termination),
        cfg.spectrum.j_max
    );
    let _ = writeln!(out, "w,h,exact,events");
    for (w, h) in keys {
        let _ = writeln!(out, "{w},{h},{},{}", exact.get(w, h), approx.get(w, h));
    }
    write_file(&ctx.out_dir, &format!("spectrum_{code_id}_N{n}.csv"), out.as_bytes())
}

fn bound_channel(ch: ChannelKind) -> Channel {
    match ch {
        ChannelKind::Awgn => Channel::Awgn,
        ChannelKind::Rayleigh => Channel::Rayleigh,
    }
}

fn pep_for(cfg: &ToolkitConfig, ch: ChannelKind) -> PepForm {
    match ch {
        ChannelKind::Awgn => cfg.bound.awgn_pep,
        ChannelKind::Rayleigh => cfg.bound.rayleigh_pep,
    }
}

/// Union (and, for HCTC, asymptotic) curves plus the exponent scan summary.
pub struct SchemeBounds {
    pub curves: Vec<BoundCurve>,
    pub alpha_max: Option<i32>,
    pub meta: Vec<String>,
}

pub fn scheme_bounds(
    cfg: &ToolkitConfig,
    scheme: &ConcatScheme,
    channels: &[ChannelKind],
    grid: &[f64],
) -> Result<SchemeBounds, CliError> {
    let spectra = ComponentSpectra::compute(scheme, &cfg.spectrum)?;
    let iowc = spectra.iowc(scheme)?;
    let mut curves = Vec::new();
    for &ch in channels {
        curves.push(union_bound(&iowc, scheme, bound_channel(ch), pep_for(cfg, ch), grid)?);
    }
    let mut meta = Vec::new();
    let mut alpha_max = None;
    if cfg.spectrum.method == SpectrumMethod::Events {
        let scan = ExponentScan::compute(scheme, &spectra)?;
        alpha_max = Some(scan.alpha_max());
        let dom = scan.dominant();
        meta.push(format!(
            "N1={} alpha_max={} dominant_h={} dominant_alpha={}",
            scheme.n1,
            scan.alpha_max(),
            dom.h,
            dom.alpha
        ));
        if cfg.bound.asymptotic && scheme.kind() == SchemeKind::Hctc {
            let params = AsymptoticParams::derive(scheme, &spectra, &scan)?;
            meta.push(format!(
                "N1={} asymptotic h_m_p={} h_m_i={} d_f_o={} w_m={}",
                scheme.n1,
                params.h_m_p.unwrap_or(0),
                params.h_m_i.unwrap_or(0),
                params.d_f_o.unwrap_or(0),
                params.w_m.unwrap_or(0)
            ));
            for &ch in channels {
                curves.push(asymptotic_bound(&params, scheme, bound_channel(ch), pep_for(cfg, ch), grid)?);
            }
        }
    }
    Ok(SchemeBounds {
        curves,
        alpha_max,
        meta,
    })
}

fn coded_scheme<'a>(cfg: &'a ToolkitConfig, id: &str) -> Result<&'a ConcatScheme, CliError> {
    match cfg.scheme(id)? {
        SchemeEntry::Coded(s) => Ok(s),
        SchemeEntry::Uncoded { .. } => Err(CliError::Config(format!("scheme '{id}' is uncoded and has no bound"))),
    }
}

pub fn cmd_bound(
    cfg: &ToolkitConfig,
    ctx: &RunContext,
    scheme_id: &str,
    channel: Option<ChannelArg>,
) -> Result<PathBuf, CliError> {
    let base = coded_scheme(cfg, scheme_id)?;
    let channels = match channel {
        None => cfg.bound.channels.clone(),
        Some(ChannelArg::Awgn) => vec![ChannelKind::Awgn],
        Some(ChannelArg::Rayleigh) => vec![ChannelKind::Rayleigh],
        Some(ChannelArg::Both) => vec![ChannelKind::Awgn, ChannelKind::Rayleigh],
    };
    let sizes = if cfg.bound.n1.is_empty() {
        vec![base.n1]
    } else {
        cfg.bound.n1.clone()
    };
    let mut out = Vec::new();
    writeln!(
        out,
        "# scheme={scheme_id} kind={} rate={} rate_convention=parity-only-parallel tails=excluded spectrum={} w_max={} h_span={} j_max={}",
        base.kind(),
        base.rate,
        match cfg.spectrum.method {
            SpectrumMethod::Events => "events",
            SpectrumMethod::Exact => "exact",
        },
        cfg.spectrum.w_max,
        cfg.spectrum.h_span,
        cfg.spectrum.j_max
    )?;
    let mut curves = Vec::new();
    for n1 in sizes {
        let s = base.with_n1(n1)?;
        let b = scheme_bounds(cfg, &s, &channels, &cfg.bound.snr_db)?;
        for m in &b.meta {
            writeln!(out, "# {m}")?;
        }
        curves.extend(b.curves);
    }
    writeln!(out, "{}", BoundCurve::CSV_HEADER)?;
    for c in &curves {
        c.write_csv_rows(&mut out)?;
    }
    write_file(&ctx.out_dir, &format!("bound_{scheme_id}.csv"), &out)
}

pub fn cmd_simulate(cfg: &ToolkitConfig, ctx: &RunContext, plan_id: &str) -> Result<Vec<PathBuf>, CliError> {
    let plan = cfg.experiment(plan_id, ctx.seed)?;
    let result = run_plan(&plan, ctx.threads);
    let mut csv = Vec::new();
    write_sim_csv(&result.rows, &mut csv)?;
    let mut paths = vec![write_file(&ctx.out_dir, &format!("sim_{plan_id}.csv"), &csv)?];
    if plan.bounds.is_some() {
        let mut b = Vec::new();
        result.write_bounds_csv(&mut b)?;
        paths.push(write_file(&ctx.out_dir, &format!("sim_{plan_id}_bounds.csv"), &b)?);
    }
    if !result.failures.is_empty() {
        for (id, snr, msg) in &result.failures {
            log::error!("{id} at {snr} dB: {msg}");
        }
        return Err(CliError::Partial(format!(
            "{} of the points in plan '{plan_id}' failed; see the log",
            result.failures.len()
        )));
    }
    Ok(paths)
}

pub const COMPARE_HEADER: &str =
    "scheme_id,kind,channel,N1,N2,rate,EbN0_dB,iteration,bits,errors,ber,ci_lo,ci_hi,Pb_bound,alpha_max,seed,flag";

/// Simulation and union bound for every comparison scheme on both channels,
/// joined on the shared SNR grid at the final decoder iteration.
pub fn cmd_compare(cfg: &ToolkitConfig, ctx: &RunContext) -> Result<PathBuf, CliError> {
    let cmp = cfg
        .compare
        .as_ref()
        .ok_or_else(|| CliError::Config("config has no [compare] section".into()))?;
    let grid = cmp.snr_db.points()?;
    let stop = ToolkitConfig::stop(&cmp.stop);
    let channels = [ChannelKind::Awgn, ChannelKind::Rayleigh];
    let iterations = cmp.iterations.unwrap_or(cfg.decode.iterations);
    let mut out = Vec::new();
    writeln!(out, "{COMPARE_HEADER}")?;
    let mut failures = 0;
    for id in &cmp.schemes {
        let s = coded_scheme(cfg, id)?.with_n1(cmp.n1)?;
        let bounds = scheme_bounds(cfg, &s, &channels, &grid)?;
        let entry = SchemeEntry::Coded(s.clone());
        let plan = ExperimentPlan {
            id: format!("compare-{id}"),
            links: channels.iter().map(|&ch| cfg.link(&entry, ch, stop, Some(iterations))).collect(),
            snr_db: grid.clone(),
            seed: ctx.seed,
            report_iterations: vec![iterations],
            bounds: None,
        };
        let result = run_plan(&plan, ctx.threads);
        for (sid, snr, msg) in &result.failures {
            log::error!("{sid} at {snr} dB: {msg}");
        }
        failures += result.failures.len();
        for (ci, &ch) in channels.iter().enumerate() {
            let curve = &bounds.curves[ci];
            for row in result.rows.iter().filter(|r| r.channel == ch) {
                let pb = curve
                    .points
                    .iter()
                    .find(|p| p.ebn0_db == row.ebn0_db)
                    .map(|p| p.pb());
                write_compare_row(&mut out, &s, row, pb, bounds.alpha_max)?;
            }
        }
    }
    let path = write_file(&ctx.out_dir, "compare.csv", &out)?;
    if failures > 0 {
        return Err(CliError::Partial(format!("{failures} comparison points failed; see the log")));
    }
    Ok(path)
}

fn write_compare_row<W: Write>(
    mut out: W,
    s: &ConcatScheme,
    r: &SimRow,
    pb: Option<f64>,
    alpha: Option<i32>,
) -> std::io::Result<()> {
    writeln!(
        out,
        "{},{},{},{},{},{},{},{},{},{},{:.6e},{:.6e},{:.6e},{},{},{},{}",
        r.scheme_id,
        s.kind(),
        r.channel,
        r.n1,
        r.n2,
        s.rate,
        r.ebn0_db,
        r.iteration,
        r.bits,
        r.errors,
        r.ber,
        r.ci_lo,
        r.ci_hi,
        pb.map(|p| format!("{p:.6e}")).unwrap_or_default(),
        alpha.map(|a| a.to_string()).unwrap_or_default(),
        r.seed,
        r.flag
    )
}
