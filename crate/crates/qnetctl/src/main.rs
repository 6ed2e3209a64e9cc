//! Command-line front end for key-rate analysis, simulation, sweeps and
//! network planning.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use twinfield::photon::Mode;
use twinfield::Error;

mod commands;
mod trace;

/// Directory searched for input files given as relative paths that do not
/// exist in the working directory.
pub const CONFIG_DIR_ENV: &str = "QNETCTL_CONFIG_DIR";

#[derive(Parser, Debug)]
#[command(name = "qnetctl", version, about = "Twin-field QKD key rates and network planning")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Simulation mode: expected, mc or sampled.
    #[arg(long, global = true, default_value = "expected")]
    pub mode: Mode,
    /// Fraction of clock pulses that carry signal.
    #[arg(long, global = true, default_value_t = 400.0 / 1024.0)]
    pub duty: f64,
    #[arg(long, global = true, default_value_t = 1e8)]
    pub clock_hz: f64,
    /// Reject inventories that use every switch port.
    #[arg(long, global = true)]
    pub strict_ports: bool,
    #[arg(long, global = true, env = CONFIG_DIR_ENV)]
    pub config_dir: Option<PathBuf>,
    /// Write the JSON report here.
    #[arg(long, short, global = true)]
    pub out: Option<PathBuf>,
    /// Print the JSON report instead of the text summary.
    #[arg(long, global = true)]
    pub json: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Key rate from a recorded tally.
    Keyrate(commands::KeyrateArgs),
    /// Simulate a session and report its key rate.
    Simulate(commands::SimulateArgs),
    /// Key rate over a range of losses or distances, as CSV.
    Sweep(commands::SweepArgs),
    /// Pair capacity and port usage of an MU inventory.
    Capacity(commands::CapacityArgs),
    /// Assign requested user pairs to MUs.
    Plan(commands::PlanArgs),
    /// Aggregate key rate of a symmetric network.
    Network(commands::NetworkArgs),
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::ConstraintViolation { .. } => 4,
        Error::InfeasibleBounds { .. } | Error::InfeasibleEverywhere => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let g = &cli.global;
    let outcome = match &cli.command {
        Command::Keyrate(a) => commands::keyrate(g, a),
        Command::Simulate(a) => commands::simulate(g, a),
        Command::Sweep(a) => commands::sweep(g, a),
        Command::Capacity(a) => commands::capacity(g, a),
        Command::Plan(a) => commands::plan(g, a),
        Command::Network(a) => commands::network(g, a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
