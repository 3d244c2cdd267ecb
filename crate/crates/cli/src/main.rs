//! `bhf`: runs one experiment from a configuration file.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure,
//! 4 I/O error. `BHF_THREADS` sets the worker count.

use std::path::PathBuf;
use std::process::ExitCode;

use bhf_core::flow::StopReason;
use bhf_core::io::config::Experiment;
use bhf_core::io::experiments::run_experiment;
use bhf_core::io::parse_config;
use bhf_core::Error;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bhf", version, about = "Biharmonic map heat flow laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Flow run with diagnostics, concentration events and snapshots.
    Run(Common),
    /// Small perturbation of a constant with constant clamped data.
    Gap(Common),
    /// Single Fourier mode under the linear flow on a torus.
    LinearValidate(Common),
    /// Empirical constants of the interpolation inequalities.
    ProbeInequalities(Common),
    /// Flow run followed by blow-up extraction at every singular event.
    Blowup(Common),
    /// Growth of the difference between two nearby trajectories.
    Stability(Common),
}

#[derive(Args)]
struct Common {
    /// Configuration file of `key = value` lines.
    #[arg(long)]
    config: PathBuf,
    /// Snapshot to continue from.
    #[arg(long)]
    resume: Option<PathBuf>,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_IO: u8 = 4;

fn exit_code(e: &Error) -> u8 {
    if e.is_io() {
        EXIT_IO
    } else if e.is_config()
        || matches!(
            e,
            Error::Precondition(_)
                | Error::InvalidGrid(_)
                | Error::InvalidBoundaryData(_)
                | Error::IncompatibleInitialData { .. }
                | Error::PointOffManifold { .. }
        )
    {
        EXIT_CONFIG
    } else {
        EXIT_NUMERICAL
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("BHF_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("BHF_THREADS must be a positive integer, got `{v}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (experiment, args) = match cli.command {
        Command::Run(a) => (Experiment::Run, a),
        Command::Gap(a) => (Experiment::Gap, a),
        Command::LinearValidate(a) => (Experiment::LinearValidate, a),
        Command::ProbeInequalities(a) => (Experiment::ProbeInequalities, a),
        Command::Blowup(a) => (Experiment::Blowup, a),
        Command::Stability(a) => (Experiment::Stability, a),
    };
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(EXIT_CONFIG);
    }
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", args.config.display());
            return ExitCode::from(EXIT_IO);
        }
    };
    let mut cfg = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(&e));
        }
    };
    // the subcommand names the experiment; a config key is only a default
    cfg.experiment = experiment;
    match run_experiment(&cfg, args.resume.as_deref()) {
        Ok(report) => {
            print!("{}", report.render());
            if let Some(StopReason::Singularity { t, node }) = report.stop {
                let e = Error::SingularityStop { t, node };
                eprintln!("error: {e}");
                return ExitCode::from(exit_code(&e));
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
