//! `stem`: simulate fields, detect peaks, and tabulate FDR/power curves and
//! asymptotic thresholds.
//!
//! Exit codes: 0 on success, 1 when a file cannot be read or written, 2 when
//! a configuration or argument is invalid.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use stem_core::experiment::MomentSource;
use stem_core::{PValueMode, StemError};

#[derive(Parser, Debug)]
#[command(name = "stem", version, about = "Peak detection by smoothing and testing of local maxima")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw one realization of a scenario and write its fields.
    Simulate(SimulateArgs),
    /// Run the detection procedure on a field.
    Detect(DetectArgs),
    /// Estimate realized and theoretical FDR/power over a sweep.
    Curves(CurvesArgs),
    /// Tabulate deterministic thresholds, bounds and the optimal pre-threshold.
    Theory(TheoryArgs),
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Directory receiving signal.fld, noise.fld, observed.fld and smoothed.fld.
    #[arg(long)]
    pub output: PathBuf,
    /// Overrides the noise seed of the config.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct DetectArgs {
    /// Field file, or a CSV grid when the name ends in `.csv`.
    pub input: PathBuf,
    /// Grid spacing of a CSV input.
    #[arg(long, default_value_t = 1.0)]
    pub spacing: f64,
    /// Smoothing bandwidth. With --no-smooth, the bandwidth already applied.
    #[arg(long, conflicts_with = "fit_gamma")]
    pub gamma: Option<f64>,
    /// Fit the bandwidth to the average shape of the highest maxima.
    #[arg(long)]
    pub fit_gamma: bool,
    /// Number of maxima averaged by --fit-gamma.
    #[arg(long, default_value_t = 10)]
    pub fit_peaks: usize,
    /// Half-width in grid cells of the --fit-gamma template.
    #[arg(long, default_value_t = 10)]
    pub fit_radius: usize,
    /// Bandwidth of the pilot smoothing used to locate peaks for --fit-gamma;
    /// its width is removed from the fitted shape.
    #[arg(long, default_value_t = 1.5)]
    pub fit_pilot: f64,
    /// Pre-threshold in standard deviations of the smoothed noise.
    #[arg(long, default_value_t = f64::NEG_INFINITY, allow_hyphen_values = true)]
    pub v: f64,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value = "exact")]
    pub mode: PValueMode,
    #[arg(long, value_enum, default_value = "closed-form")]
    pub moments: MomentsArg,
    /// Noise standard deviation for closed-form moments.
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    /// Noise correlation scale for closed-form moments.
    #[arg(long, default_value_t = 0.0)]
    pub nu: f64,
    /// Input is already smoothed.
    #[arg(long)]
    pub no_smooth: bool,
    /// Scenario used to label candidates with their true region.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Detection records (one JSON object per line); stdout when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
pub enum MomentsArg {
    ClosedForm,
    Estimate,
}

impl From<MomentsArg> for MomentSource {
    fn from(m: MomentsArg) -> Self {
        match m {
            MomentsArg::ClosedForm => MomentSource::ClosedForm,
            MomentsArg::Estimate => MomentSource::Estimate,
        }
    }
}

#[derive(Args, Debug)]
pub struct CurvesArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Curve table; stdout when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub replications: Option<usize>,
    /// Overrides the master seed of the config.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct TheoryArgs {
    /// Takes bandwidth, noise, A1 and A2 from a scenario.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 3.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 0.0)]
    pub nu: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    /// Explicit moments instead of the closed form; needs --rho1 and --rho2.
    #[arg(long, requires_all = ["rho1", "rho2"])]
    pub sigma_gamma: Option<f64>,
    #[arg(long, requires = "sigma_gamma", allow_hyphen_values = true)]
    pub rho1: Option<f64>,
    #[arg(long, requires = "sigma_gamma", allow_hyphen_values = true)]
    pub rho2: Option<f64>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Peak density per unit area.
    #[arg(long, required_unless_present = "config")]
    pub a1: Option<f64>,
    /// Area fraction of the smoothed signal supports.
    #[arg(long, required_unless_present = "config")]
    pub a2: Option<f64>,
    /// Pre-thresholds in units of the smoothed noise standard deviation.
    #[arg(long, value_delimiter = ',')]
    pub v_grid: Option<Vec<f64>>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<StemError>() {
            return if matches!(e, StemError::Io(_)) { 1 } else { 2 };
        }
        if cause.is::<std::io::Error>() {
            return 1;
        }
    }
    2
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => commands::simulate(&a),
        Command::Detect(a) => commands::detect(&a),
        Command::Curves(a) => commands::curves(&a),
        Command::Theory(a) => commands::theory(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
