mod commands;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use error::CliError;

/// Shipboard power dispatch with load shedding and hybrid storage.
#[derive(Debug, Parser)]
#[command(name = "shipems", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve a mission and write a result bundle.
    Run(RunArgs),
    /// Solve with both controllers and report the loss of weighted service.
    Compare(CompareArgs),
    /// Select objective weights by finite-difference descent.
    Tune(TuneArgs),
    /// Check a scenario file without solving it.
    Validate(ValidateArgs),
    /// Generate a deterministic synthetic scenario.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Rho,
    Fho,
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Receding-horizon window length in steps (scenario default if omitted).
    #[arg(long)]
    np: Option<usize>,
    /// Objective weights `w1,w2,w3` (scenario weights if omitted).
    #[arg(long)]
    weights: Option<String>,
    /// Per-step solve budget for RHO; total budget for FHO.
    #[arg(long)]
    deadline_ms: Option<u64>,
    /// Output directory.
    #[arg(long, env = "SHIPEMS_OUT_DIR")]
    out: Option<PathBuf>,
    /// Write the bundle even if the trajectory fails the invariant check.
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long, value_enum, default_value = "rho")]
    mode: ModeArg,
    #[command(flatten)]
    solve: SolveArgs,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[command(flatten)]
    solve: SolveArgs,
}

#[derive(Debug, Args)]
struct TuneArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    gamma: f64,
    #[arg(long, default_value_t = 1e-4)]
    eps: f64,
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
    /// Starting weights `w1,w2,w3`.
    #[arg(long)]
    initial: Option<String>,
    /// Controller used for each evaluation.
    #[arg(long, value_enum, default_value = "fho")]
    mode: ModeArg,
    #[arg(long)]
    np: Option<usize>,
    #[arg(long, env = "SHIPEMS_OUT_DIR")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[arg(long)]
    scenario: PathBuf,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 8)]
    loads: usize,
    #[arg(long, default_value_t = 3)]
    gens: usize,
    #[arg(long, default_value_t = 4)]
    storage: usize,
    #[arg(long, default_value_t = 240)]
    steps: usize,
    /// Scenario file to write; the demand table goes next to it.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => commands::run(a),
        Command::Compare(a) => commands::compare(a),
        Command::Tune(a) => commands::tune(a),
        Command::Validate(a) => commands::validate(a),
        Command::Synth(a) => commands::synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn out_dir(out: Option<PathBuf>) -> Result<PathBuf, CliError> {
    out.ok_or_else(|| {
        CliError::Usage("no output directory: pass --out or set SHIPEMS_OUT_DIR".into())
    })
}
