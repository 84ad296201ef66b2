//! `qdswap` command-line front end.
//!
//! Exit codes: 0 success, 1 output I/O failure, 2 configuration error,
//! 3 numeric failure.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use qdswap_core::BellKind;
use thiserror::Error;

pub mod commands;
pub mod config;

use config::Grid;

/// Environment variable capping the number of Monte Carlo workers.
pub const THREADS_ENV: &str = "QDSWAP_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl From<qdswap_core::Error> for CliError {
    fn from(e: qdswap_core::Error) -> Self {
        use qdswap_core::Error as E;
        match e {
            E::InvalidParameter { .. }
            | E::UnknownBasis(_)
            | E::InvalidDimension(_)
            | E::UnsupportedSlots(..)
            | E::UnnormalizedTarget(_)
            | E::DimensionMismatch { .. } => CliError::Config(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "qdswap",
    version,
    about = "Entanglement swapping between quantum-dot photon-pair sources"
)]
pub struct Cli {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fidelity of one source's photon pair with a Bell state.
    PairFidelity(PairArgs),
    /// Swapped-state fidelity for two sources, single point or FSS grid.
    Swap(SwapArgs),
    /// Population Monte Carlo for a tuning scenario.
    Montecarlo(McArgs),
    /// Probability of tuning two random dots into resonance.
    Resonance(ResonanceArgs),
    /// Fit Gaussian parameter distributions to measured samples.
    Fit(FitArgs),
    /// Simulated coincidence counts and state reconstruction.
    Tomography(TomographyArgs),
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct PairArgs {
    /// Fine-structure splitting (µeV).
    #[arg(long)]
    pub fss: Option<f64>,
    /// Exciton lifetime (ns).
    #[arg(long)]
    pub t1x: Option<f64>,
    /// Pure dephasing time applied to the pair coherence (ns).
    #[arg(long)]
    pub t2star: Option<f64>,
    /// Detection gate window (ns); ungated when absent.
    #[arg(long)]
    pub gate: Option<f64>,
    #[arg(long)]
    pub target: Option<BellKind>,
    /// Print a CSV row instead of a table.
    #[arg(long)]
    pub csv: bool,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct SwapArgs {
    #[arg(long)]
    pub fss_a: Option<f64>,
    #[arg(long)]
    pub fss_b: Option<f64>,
    /// Exciton lifetime of both sources (ns).
    #[arg(long)]
    pub t1x: Option<f64>,
    /// Biexciton lifetime of both sources (ns).
    #[arg(long)]
    pub t1xx: Option<f64>,
    /// Pure dephasing time of both sources (ns).
    #[arg(long)]
    pub t2star: Option<f64>,
    /// XX–XX detuning at the Bell measurement (µeV).
    #[arg(long)]
    pub detuning: Option<f64>,
    /// Unit interference visibility at the Bell measurement.
    #[arg(long)]
    pub ideal_bsm: bool,
    /// Leave out the cascade timing-jitter limit of the visibility.
    #[arg(long)]
    pub no_cascade: bool,
    /// FSS grid `start:stop:points` (µeV) applied to both sources; emits CSV.
    #[arg(long)]
    pub grid: Option<Grid>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub csv: bool,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct McArgs {
    /// Preset scenario 1..=6.
    #[arg(long)]
    pub scenario: Option<u8>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub samples: Option<u64>,
    #[arg(long)]
    pub bins: Option<usize>,
    /// Unit interference visibility at the Bell measurement.
    #[arg(long)]
    pub ideal_bsm: bool,
    /// Histogram CSV; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Summary text file; defaults to `<out>.summary.txt` when `--out` is set.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    /// Raw per-sample fidelities as CSV.
    #[arg(long)]
    pub samples_out: Option<PathBuf>,
    /// Worker threads (further capped by QDSWAP_THREADS).
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct ResonanceArgs {
    #[arg(long)]
    pub mu_a: Option<f64>,
    #[arg(long)]
    pub mu_b: Option<f64>,
    #[arg(long)]
    pub sigma_a: Option<f64>,
    #[arg(long)]
    pub sigma_b: Option<f64>,
    #[arg(long)]
    pub tune_a: Option<f64>,
    #[arg(long)]
    pub tune_b: Option<f64>,
    /// Emit the (Δμ, σ, P) surface instead of a single value.
    #[arg(long)]
    pub sweep: bool,
    /// Δμ grid for the sweep (nm).
    #[arg(long)]
    pub dmu: Option<Grid>,
    /// σ grid for the sweep (nm), used for both populations.
    #[arg(long)]
    pub sigma: Option<Grid>,
    /// Per-device tuning range for the sweep (nm).
    #[arg(long)]
    pub tune: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct FitArgs {
    /// CSV of samples; one column per parameter, header names with units
    /// (`wavelength_x_nm`, `fss_uev`, `t1x_ns`, `t1xx_ns`, `t2star_ns`).
    #[arg(long)]
    pub input: PathBuf,
    /// Output config JSON; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct TomographyArgs {
    #[arg(long)]
    pub fss: Option<f64>,
    #[arg(long)]
    pub t1x: Option<f64>,
    #[arg(long)]
    pub t2star: Option<f64>,
    #[arg(long)]
    pub gate: Option<f64>,
    #[arg(long)]
    pub shots: Option<u64>,
    /// Poisson counting noise (requires --seed).
    #[arg(long)]
    pub noise: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Use all 36 analyzer combinations instead of the minimal 16.
    #[arg(long)]
    pub full_basis: bool,
    #[arg(long)]
    pub target: Option<BellKind>,
    /// Reconstruct from a counts CSV instead of simulating.
    #[arg(long)]
    pub counts_in: Option<PathBuf>,
    #[arg(long)]
    pub counts_out: Option<PathBuf>,
    /// Reconstructed matrix (real and imaginary parts) as CSV.
    #[arg(long)]
    pub matrix_out: Option<PathBuf>,
    /// Comma-separated gate windows (ns); emits the fidelity/counts trade-off.
    #[arg(long, value_delimiter = ',')]
    pub gate_sweep: Option<Vec<f64>>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Runs one parsed invocation, writing human output to `stdout`.
pub fn run(cli: Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    let cfg = match &cli.config {
        Some(path) => config::RunConfig::load(path)?,
        None => config::RunConfig::default(),
    };
    match cli.command {
        Command::PairFidelity(a) => commands::pair_fidelity(&a, &cfg, stdout),
        Command::Swap(a) => commands::swap(&a, &cfg, stdout),
        Command::Montecarlo(a) => commands::montecarlo(&a, &cfg, stdout),
        Command::Resonance(a) => commands::resonance(&a, &cfg, stdout),
        Command::Fit(a) => commands::fit(&a, stdout),
        Command::Tomography(a) => commands::tomography(&a, &cfg, stdout),
    }
}
