//! `clickhomodyne`: simulate click-detector time tags, sweep the local
//! oscillator flux and analyse tag files.
//!
//! Exit status: 0 success, 2 configuration or usage error, 3 I/O or file
//! format error, 4 analysis precondition failure.

mod commands;
mod flux;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use clickhomodyne_core::homodyne::DeviationMetric;
use clickhomodyne_core::Error;

#[derive(Debug, Parser)]
#[command(name = "clickhomodyne", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one detector pair and write both tag files plus a manifest.
    Simulate(SimulateArgs),
    /// Run a local-oscillator flux sweep and report the clearance.
    Sweep(SweepArgs),
    /// Analyse an existing pair of tag files.
    Analyze(AnalyzeArgs),
}

/// Command-line overrides of the configuration file.
#[derive(Debug, Args)]
pub struct SimOverrides {
    /// Measurement window in seconds (config `duration_ps` otherwise).
    #[arg(long, value_name = "S")]
    pub duration_s: Option<f64>,
    /// Dead time of both detectors in ns (config values otherwise).
    #[arg(long, value_name = "NS")]
    pub dead_time_ns: Option<f64>,
    /// Base seed. Precedence: --seed, then $CLICKHOMODYNE_SEED, then config.
    #[arg(long, env = "CLICKHOMODYNE_SEED")]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub sim: SimOverrides,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MetricArg {
    /// |var/ref - 1|
    Relative,
    /// |log10(var/ref)|
    Log10,
}

impl From<MetricArg> for DeviationMetric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Relative => DeviationMetric::Relative,
            MetricArg::Log10 => DeviationMetric::Log10,
        }
    }
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// `log:<start>:<stop>:<points>` or a comma list, in LO photons/s.
    #[arg(long)]
    pub flux: String,
    /// Sweep CSV path.
    #[arg(long)]
    pub out: PathBuf,
    /// Clearance report path; printed to stdout when omitted.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Also write g2 at `--g2-tau` for every flux to this CSV.
    #[arg(long)]
    pub g2_out: Option<PathBuf>,
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    pub g2_tau: i64,
    /// g2 points with fewer coincidences are flagged `low_statistics`.
    #[arg(long, default_value_t = 10)]
    pub min_coincidences: u64,
    #[arg(long, default_value_t = 500.0, value_name = "NS")]
    pub bin_width_ns: f64,
    /// The lowest N fluxes use `--low-flux-duration-s` instead.
    #[arg(long, default_value_t = 0, value_name = "N")]
    pub low_flux_points: usize,
    #[arg(long, default_value_t = 5.0, value_name = "S")]
    pub low_flux_duration_s: f64,
    /// Allowed deviation from the shot-noise line.
    #[arg(long, default_value_t = 0.1)]
    pub max_dev: f64,
    #[arg(long, value_enum, default_value_t = MetricArg::Relative)]
    pub metric: MetricArg,
    /// Points with detected LO flux below this define the dark floor
    /// (default: 0.1 x the summed dark rate).
    #[arg(long, value_name = "HZ")]
    pub dark_threshold_hz: Option<f64>,
    /// Worker threads (default: all cores).
    #[arg(long, value_name = "N")]
    pub jobs: Option<usize>,
    #[command(flatten)]
    pub sim: SimOverrides,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Mode {
    Homodyne,
    G2,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long, value_enum)]
    pub mode: Mode,
    pub file_a: PathBuf,
    pub file_b: PathBuf,
    #[arg(long, default_value_t = 500.0, value_name = "NS")]
    pub bin_width_ns: f64,
    #[arg(long, default_value_t = 20)]
    pub tau_range: u64,
    #[arg(long, default_value_t = 10)]
    pub min_coincidences: u64,
    /// Result CSV path; printed to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also export the binned counts of both channels.
    #[arg(long)]
    pub binned_csv: Option<PathBuf>,
}

/// A failed command, carrying its exit status.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Io(String),
    Analysis(String),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Io(_) => 3,
            Failure::Analysis(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Io(m) | Failure::Analysis(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::Config(_) => Failure::Config(msg),
            Error::Format(_) | Error::Io(_) => Failure::Io(msg),
            Error::Analysis(_) => Failure::Analysis(msg),
        }
    }
}

macro_rules! via_core_error {
    ($($t:ty),*) => {$(
        impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                Error::from(e).into()
            }
        }
    )*};
}
via_core_error!(
    clickhomodyne_core::ConfigError,
    clickhomodyne_core::FormatError,
    clickhomodyne_core::AnalysisError,
    std::io::Error
);

impl From<flux::FluxSpecError> for Failure {
    fn from(e: flux::FluxSpecError) -> Self {
        Failure::Config(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => commands::simulate(&a),
        Command::Sweep(a) => commands::sweep(&a),
        Command::Analyze(a) => commands::analyze(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.exit_code())
        }
    }
}
