//! `magcomp`: simulate, calibrate, compensate and score aeromagnetic data.

mod commands;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::LevelFilter;

use error::EXIT_USAGE;

/// Environment variable that overrides simulator seeds.
pub const SEED_ENV: &str = "MAGCOMP_SEED";

#[derive(Debug, Parser)]
#[command(name = "magcomp", version, about = "Tolles-Lawson aeromagnetic compensation toolkit")]
pub struct Cli {
    /// More log output (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    /// Only log errors.
    #[arg(short, long, global = true, conflicts_with = "verbose")]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic flight with known ground truth.
    Simulate(SimulateArgs),
    /// Fit Tolles-Lawson coefficients from a calibration flight.
    Calibrate(CalibrateArgs),
    /// Subtract the modelled aircraft field from a magnetometer channel.
    Compensate(CompensateArgs),
    /// Score compensated channels against a truth signal.
    Evaluate(EvaluateArgs),
    /// Upward-continue an anomaly map.
    MapUpward(MapUpwardArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Fluxgate {
    #[value(name = "B")]
    B,
    #[value(name = "C")]
    C,
    #[value(name = "D")]
    D,
}

impl Fluxgate {
    pub fn letter(self) -> &'static str {
        match self {
            Fluxgate::B => "B",
            Fluxgate::C => "C",
            Fluxgate::D => "D",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TruthArg {
    Stinger,
    Map,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Flat key = value simulator config.
    #[arg(long)]
    pub config: PathBuf,
    /// Output flight file.
    #[arg(long)]
    pub out: PathBuf,
    /// Output ground-truth file.
    #[arg(long)]
    pub truth: PathBuf,
    /// Unmodelled vector disturbance amplitude (nT) for every sensor.
    #[arg(long, value_name = "NT")]
    pub model_error: Option<f64>,
    /// Seed, overriding the config and the environment.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct FlightInput {
    /// Flight file.
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
    /// Sample rate (Hz); derived from TIME when absent.
    #[arg(long)]
    pub fs: Option<f64>,
    /// Only use rows of this line number (XXXX.YY).
    #[arg(long)]
    pub line: Option<String>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[command(flatten)]
    pub flight: FlightInput,
    /// Scalar magnetometer channel.
    #[arg(long)]
    pub mag: String,
    /// Vector magnetometer used for direction cosines.
    #[arg(long, value_enum, ignore_case = true)]
    pub flux: Fluxgate,
    /// Ridge parameter.
    #[arg(long, default_value_t = 0.0)]
    pub lambda: f64,
    /// Lower passband edge (Hz).
    #[arg(long, default_value_t = 0.1)]
    pub pass1: f64,
    /// Upper passband edge (Hz).
    #[arg(long, default_value_t = 0.9)]
    pub pass2: f64,
    /// Bandpass order (even).
    #[arg(long, default_value_t = 4)]
    pub order: usize,
    /// Coefficient file; printed to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompensateArgs {
    #[command(flatten)]
    pub flight: FlightInput,
    /// Coefficient file.
    #[arg(long)]
    pub coeffs: PathBuf,
    /// Scalar magnetometer channel
    #[arg(long)]
    pub mag: String,
    /// Vector magnetometer used for direction cosines
    #[arg(long, value_enum, ignore_case = true)]
    pub flux: Fluxgate,
    /// Output flight file with the compensated channel appended.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub flight: FlightInput,
    /// Coefficient file (applied to every --mag channel) or a directory of
    /// `<CHANNEL>.coef` files.
    #[arg(long)]
    pub coeffs: PathBuf,
    /// Truth signal: the stinger channel IGRFMAG1 or an anomaly map
    #[arg(long, value_enum)]
    pub truth: TruthArg,
    /// Anomaly map for map truth.
    #[arg(long)]
    pub map: Option<PathBuf>,
    /// Upward-continue the map to this altitude (m) before interpolating.
    #[arg(long)]
    pub survey_alt: Option<f64>,
    /// Channels to score; repeatable.
    #[arg(long)]
    pub mag: Vec<String>,
    /// Vector magnetometer used for direction cosines
    #[arg(long, value_enum, ignore_case = true, default_value = "B")]
    pub flux: Fluxgate,
    /// Detrend candidate and truth separately instead of the residual.
    #[arg(long)]
    pub per_series: bool,
    /// Report CSV.
    #[arg(long)]
    pub report: PathBuf,
    /// SVG plot of truth and compensated traces.
    #[arg(long)]
    pub plot: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MapUpwardArgs {
    /// Input map file
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
    /// Continuation distance (m), positive upward.
    #[arg(long, allow_negative_numbers = true)]
    pub dz: f64,
    /// Output map file
    #[arg(long)]
    pub out: PathBuf,
    /// Mirror-pad the grid before transforming.
    #[arg(long)]
    pub pad: bool,
    /// Permit negative dz (needs --kcut).
    #[arg(long)]
    pub allow_downward: bool,
    /// Wavenumber cutoff (rad/m).
    #[arg(long)]
    pub kcut: Option<f64>,
}

fn init_logging(cli: &Cli) {
    let level = match (cli.quiet, cli.verbose) {
        (true, _) => LevelFilter::Error,
        (false, 0) => LevelFilter::Info,
        (false, 1) => LevelFilter::Debug,
        _ => LevelFilter::Trace,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().format_timestamp(None).init();
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE as u8 } else { 0 });
        }
    };
    init_logging(&cli);
    match commands::run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn parses_negative_dz() {
        let cli = Cli::try_parse_from(["magcomp", "map-upward", "--in", "a", "--dz", "-50", "--out", "b"]).unwrap();
        match cli.command {
            Command::MapUpward(a) => assert_eq!(a.dz, -50.0),
            _ => unreachable!(),
        }
    }

    #[test]
    fn rejects_unknown_flag_and_bad_flux() {
        assert!(Cli::try_parse_from(["magcomp", "calibrate", "--bogus"]).is_err());
        assert!(Cli::try_parse_from(["magcomp", "calibrate", "--in", "f", "--mag", "M", "--flux", "Q"]).is_err());
    }
}
