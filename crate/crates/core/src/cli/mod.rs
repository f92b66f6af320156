//! Command-line front end: `zwm-sim spectrum | visibility | montecarlo | validate`.

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::error::Error;
use config::{ConfigError, Overrides, Scenario, SimConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_LOW_STATISTICS: i32 = 3;

pub const THREADS_ENV: &str = "ZWM_SIM_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "zwm-sim",
    version,
    about = "Frequency-comb induced-coherence interferometry simulator"
)]
pub struct Args {
    #[command(subcommand)]
    pub command: Command,
    /// JSON run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Monte Carlo seed (overrides the config).
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Drop the sample phase from the interference cross term.
    #[arg(long, global = true)]
    pub paper_exact_cross_term: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Signal spectrum at three approximation levels.
    Spectrum,
    /// Per-mode visibility table from the analytic forward map.
    Visibility,
    /// Simulated phase sweep with a comb-resolving spectrometer.
    Montecarlo,
    /// Regime checks without simulating.
    Validate,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("low statistics: {0}")]
    LowStatistics(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Numerical(_) => EXIT_NUMERICAL,
            CliError::LowStatistics(_) => EXIT_LOW_STATISTICS,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let text = e.to_string();
        match e {
            Error::LowStatistics { .. } => CliError::LowStatistics(text),
            Error::Domain { .. } | Error::Estimation(_) | Error::CannotNormalize(_) => CliError::Numerical(text),
            Error::InvalidGeometry(_)
            | Error::InvalidParams(_)
            | Error::InvalidGrid(_)
            | Error::GridTooCoarse { .. }
            | Error::GridTooNarrow { .. }
            | Error::EmptyCombRange { .. }
            | Error::InvalidSample(_)
            | Error::InvalidSpectrometer(_) => CliError::Config(text),
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Some(raw) = std::env::var_os(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .to_str()
        .and_then(|s| s.trim().parse().ok())
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Config(format!("{THREADS_ENV} must be a positive integer, got {raw:?}")))?;
    // A second call in the same process finds the pool already built.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

pub fn execute(args: &Args) -> Result<(), CliError> {
    configure_threads()?;
    let path = args
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config PATH is required".into()))?;
    let config = SimConfig::load(path)?;
    let overrides = Overrides {
        out_dir: args.out.clone(),
        seed: args.seed,
        paper_exact_cross_term: args.paper_exact_cross_term,
    };
    let scn = Scenario::resolve(config, &overrides)?;
    match args.command {
        Command::Spectrum => {
            let h = commands::cmd_spectrum(&scn)?;
            println!(
                "wrote {} and {} to {} (full vs good-cavity peak deviation {:.3e})",
                commands::SPECTRUM_CSV,
                commands::SPECTRUM_JSON,
                scn.out_dir.display(),
                h.peak_deviation.full_vs_good_cavity
            );
        }
        Command::Visibility => {
            let h = commands::cmd_visibility(&scn)?;
            print!(
                "wrote {} and {} to {} ({} modes)",
                commands::VISIBILITY_CSV,
                commands::VISIBILITY_JSON,
                scn.out_dir.display(),
                h.n_modes
            );
            match &h.reconstruction {
                Some(r) => println!(", max |T_hat - |T|| = {:.3e}", r.max_abs_error),
                None => println!(),
            }
        }
        Command::Montecarlo => {
            let report = commands::cmd_montecarlo(&scn)?;
            println!(
                "wrote {} and {} to {}",
                commands::COUNTS_CSV,
                commands::ESTIMATES_JSON,
                scn.out_dir.display()
            );
            for e in &report.estimates {
                println!(
                    "m = {}: V = {:.6} +/- {:.6}, T_hat = {:.6}",
                    e.m, e.visibility, e.std_err, e.t_hat
                );
            }
        }
        Command::Validate => {
            for c in commands::cmd_validate(&scn)? {
                println!("{c}");
            }
        }
    }
    Ok(())
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(&args) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("zwm-sim: {e}");
            e.exit_code()
        }
    }
}
