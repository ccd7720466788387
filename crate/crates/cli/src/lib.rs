//! `hctc` command-line toolkit: weight spectra, union bounds and Monte Carlo
//! link simulation driven by one TOML configuration file.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numeric or resource
//! error, 4 partial plan failure.

pub mod commands;
pub mod config;

use clap::{Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use thiserror::Error;

pub use config::ToolkitConfig;

/// Environment variable that overrides the configured output directory.
pub const OUT_DIR_ENV: &str = "HCTC_OUT_DIR";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Numeric(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    /// Some plan points failed; the others were written.
    #[error("{0}")]
    Partial(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) | CliError::Io(_) => 3,
            CliError::Partial(_) => 4,
        }
    }
}

impl From<hctc_core::Error> for CliError {
    fn from(e: hctc_core::Error) -> Self {
        use hctc_core::Error as E;
        match e {
            E::Config(_) | E::Input(_) => CliError::Config(e.to_string()),
            E::Dimension(_) | E::LimitExceeded(_) | E::Resource(_) => CliError::Numeric(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "hctc", version, about = "Bounds and simulation for hybrid concatenated trellis codes over CPFSK")]
pub struct Cli {
    /// Configuration file.
    #[arg(long, global = true, default_value = "configs/default.toml")]
    pub config: PathBuf,
    /// Output directory (overrides HCTC_OUT_DIR and the config).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Master seed override.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for simulation; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// More log output; repeat for debug.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ChannelArg {
    Awgn,
    Rayleigh,
    Both,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact and error-event IOWC of one component code.
    Spectrum {
        code_id: String,
        /// Information bits per frame.
        #[arg(long)]
        n: usize,
    },
    /// Union and asymptotic bounds of one scheme over the configured grid.
    Bound {
        scheme_id: String,
        /// Channel selection; default is the configured list.
        #[arg(long, value_enum)]
        channel: Option<ChannelArg>,
    },
    /// Run one experiment plan.
    Simulate { plan_id: String },
    /// Bounds and simulation of the comparison schemes on both channels.
    Compare,
}

/// Resolved global options.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub out_dir: PathBuf,
    pub seed: u64,
    pub threads: usize,
}

impl RunContext {
    pub fn new(cli: &Cli, cfg: &ToolkitConfig) -> Self {
        let out_dir = cli
            .out
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
            .unwrap_or_else(|| cfg.out_dir.clone());
        Self {
            out_dir,
            seed: cli.seed.unwrap_or(cfg.seed),
            threads: cli.threads,
        }
    }
}

/// Run a parsed command line; returns the written files.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    let cfg = ToolkitConfig::load(&cli.config)?;
    let ctx = RunContext::new(cli, &cfg);
    std::fs::create_dir_all(&ctx.out_dir)
        .map_err(|e| CliError::Numeric(format!("cannot create {}: {e}", ctx.out_dir.display())))?;
    match &cli.command {
        Command::Spectrum { code_id, n } => commands::cmd_spectrum(&cfg, &ctx, code_id, *n).map(|p| vec![p]),
        Command::Bound { scheme_id, channel } => commands::cmd_bound(&cfg, &ctx, scheme_id, *channel).map(|p| vec![p]),
        Command::Simulate { plan_id } => commands::cmd_simulate(&cfg, &ctx, plan_id),
        Command::Compare => commands::cmd_compare(&cfg, &ctx).map(|p| vec![p]),
    }
}

/// Entry point shared by the binary: logging, dispatch and exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .try_init();
    match run(&cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            0
        }
        Err(e) => {
            eprintln!("hctc: {e}");
            e.exit_code()
        }
    }
}
