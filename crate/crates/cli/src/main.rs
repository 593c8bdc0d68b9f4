//! `anodiff`: simulate particle systems and their limits, evolve densities,
//! estimate exponents and run the self-checks.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use commands::ChecksFailed;

#[derive(Debug, Parser)]
#[command(name = "anodiff", version, about = "Anomalous diffusion from heterogeneous Brownian baths")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Worker threads for the parallel pool (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Master seed; overrides the configuration file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory receiving every output file.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Run on one thread; results are identical to the parallel run.
    #[arg(long, global = true)]
    serial: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Bin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AveragingArg {
    Time,
    Ensemble,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum HurstFamilyArg {
    Stable,
    Tempered,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate the finite-N particle system.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated subset of X, Xtilde, Ztilde.
        #[arg(long, default_value = "X", value_delimiter = ',')]
        observables: Vec<String>,
        /// Overrides `run.n_traj`.
        #[arg(long)]
        n_traj: Option<usize>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Sample exact paths of the Gaussian limit process.
    LimitSample(LimitArgs),
    /// Sample superstatistical paths with random amplitude and Hurst index.
    Superstat(SuperstatArgs),
    /// Evolve a Gaussian density under the mixed pseudo-differential equation.
    Kfp {
        /// Configuration with a `[mixing]` section.
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated output times.
        #[arg(long = "t", value_delimiter = ',', required = true)]
        times: Vec<f64>,
        /// Initial density; `gaussian:<variance>`.
        #[arg(long, default_value = "gaussian:0.1")]
        u0: String,
        #[arg(long, default_value_t = anodiff::kfp::DEFAULT_POINTS)]
        points: usize,
        /// Grid doublings allowed when the density reaches the boundary.
        #[arg(long, default_value_t = 6)]
        max_doublings: u32,
    },
    /// MSD curve, exponent fit and Gaussianity of a stored ensemble.
    Estimate {
        /// Path table written by simulate, limit-sample or superstat (`.csv` or `.bin`).
        #[arg(long)]
        input: PathBuf,
        /// Lags; default is every grid lag up to half the horizon.
        #[arg(long, value_delimiter = ',')]
        lags: Option<Vec<f64>>,
        #[arg(long, value_enum, default_value = "time")]
        averaging: AveragingArg,
        /// Fit window `lo,hi` for the log-log slope.
        #[arg(long, value_delimiter = ',')]
        window: Option<Vec<f64>>,
        /// Time of the marginal tested for Gaussianity (default: last grid time).
        #[arg(long)]
        at: Option<f64>,
    },
    /// Sweep N and fit the decay rates of the approximation chain.
    Converge {
        #[arg(long)]
        config: PathBuf,
        /// Ascending particle counts.
        #[arg(long, value_delimiter = ',', default_value = "64,128,256,512,1024,2048,4096")]
        n_list: Vec<usize>,
        #[arg(long)]
        n_traj: Option<usize>,
    },
    /// Run the named reduction and invariant checks.
    Selftest {
        /// Only checks whose name contains this string.
        #[arg(long)]
        filter: Option<String>,
    },
}

#[derive(Debug, Args)]
pub struct LimitArgs {
    /// fbm, stable-sum, tempered, exponential, wiener, unit-jump, sqrt-exp, log-ratio, gamma, gamma-compound.
    #[arg(long, default_value = "fbm")]
    family: String,
    #[arg(long = "H")]
    hurst: Option<f64>,
    /// Hurst indices of a stable sum, comma-separated.
    #[arg(long = "Hs", value_delimiter = ',')]
    hursts: Option<Vec<f64>>,
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long = "C-alpha", default_value_t = 1.0)]
    friction_scale: f64,
    #[arg(long = "C-beta", default_value_t = 1.0)]
    drive_scale: f64,
    #[arg(long = "C-delta", default_value_t = 1.0)]
    limit_constant: f64,
    #[arg(long, default_value_t = 1.0)]
    horizon: f64,
    #[arg(long, default_value_t = 64)]
    n_steps: usize,
    /// Logarithmic grid `lo,hi,n` instead of the uniform one.
    #[arg(long, value_delimiter = ',')]
    log_grid: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1000)]
    n_traj: usize,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Debug, Args)]
pub struct SuperstatArgs {
    /// Optional configuration supplying constants and a `[mixing]` section.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Amplitude law, e.g. `exp:1.0` or `lognormal:0,0.5`.
    #[arg(long = "A-law")]
    a_law: Option<String>,
    /// Hurst law, e.g. `uniform:0.55,0.95` or `discrete:0.6@0.5,0.9@0.5`.
    #[arg(long = "H-law")]
    h_law: Option<String>,
    #[arg(long, value_enum)]
    family: Option<HurstFamilyArg>,
    /// Hurst bucket for factor caching, or `exact`.
    #[arg(long)]
    bucket: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    horizon: f64,
    #[arg(long, default_value_t = 64)]
    n_steps: usize,
    #[arg(long)]
    n_traj: Option<usize>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<ChecksFailed>().is_some() {
        return 2;
    }
    match err.downcast_ref::<anodiff::Error>() {
        Some(e) if e.is_numerical() => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let argv: Vec<String> = std::env::args().skip(1).collect();
    match commands::dispatch(&cli.common, cli.command, argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
