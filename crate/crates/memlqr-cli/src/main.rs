//! Command-line front end: parses a JSON run configuration, dispatches to
//! one of the five commands, and maps outcomes to exit codes.
//!
//! Exit codes: 0 all checks passed, 1 an analytic check failed (rank
//! defect, unstable cross-mesh loop), 2 invalid configuration or an
//! infeasible decay-rate request, 3 a numerical routine failed to converge.

mod commands;
mod config;
mod emit;

use clap::{Args, Parser, Subcommand};
use commands::{Context, Verdict};
use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug)]
pub enum CliError {
    /// Configuration, argument, or IO problems: exit code 2.
    Config(String),
    /// Library errors; numerical failures exit 3, the rest exit 2.
    Lib(memlqr::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "{msg}"),
            CliError::Lib(err) => write!(f, "{err}"),
        }
    }
}

impl From<memlqr::Error> for CliError {
    fn from(err: memlqr::Error) -> Self {
        CliError::Lib(err)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Lib(err) => match err {
                memlqr::Error::NoConvergence { .. }
                | memlqr::Error::SingularMatrix(_)
                | memlqr::Error::HamiltonianAxisEigenvalue { .. }
                | memlqr::Error::DegenerateWindow(..) => 3,
                _ => 2,
            },
        }
    }
}

/// Feedback synthesis and validation for a heat equation with memory.
#[derive(Parser)]
#[command(name = "memlqr", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Report the analytic spectrum and the unstable-mode count.
    Spectrum(CommonArgs),
    /// Run the stabilizability rank test over the slow eigenvalue groups.
    Check(CommonArgs),
    /// Synthesize the feedback gain and verify it on a finer mesh.
    Solve(CommonArgs),
    /// Tabulate gain-representer distances across paired meshes.
    Sweep(CommonArgs),
    /// Integrate open- and closed-loop trajectories and fit decay rates.
    Simulate(CommonArgs),
}

impl Command {
    fn args(&self) -> &CommonArgs {
        match self {
            Command::Spectrum(a)
            | Command::Check(a)
            | Command::Solve(a)
            | Command::Sweep(a)
            | Command::Simulate(a) => a,
        }
    }
}

#[derive(Args)]
struct CommonArgs {
    /// Path to the JSON run configuration.
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory; overrides `out_dir` from the configuration.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Use the full-size verification mesh for cross checks.
    #[arg(long)]
    expensive: bool,
    /// Mesh parameter override for solve and simulate.
    #[arg(long)]
    n: Option<usize>,
    /// Comma-separated mesh list override for sweep.
    #[arg(long, value_name = "N1,N2,...", value_delimiter = ',')]
    n_list: Option<Vec<usize>>,
}

fn init_thread_pool() -> Result<(), CliError> {
    if let Ok(raw) = std::env::var("MEMLQR_THREADS") {
        let threads: usize = raw.parse().map_err(|_| {
            CliError::Config(format!("MEMLQR_THREADS must be a positive integer, got {raw:?}"))
        })?;
        if threads == 0 {
            return Err(CliError::Config("MEMLQR_THREADS must be at least 1".into()));
        }
        // A second build_global in the same process is a no-op; that only
        // happens in tests driving run() twice.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<Verdict, CliError> {
    init_thread_pool()?;
    let args = cli.command.args();
    let config = config::RunConfig::load(&args.config)?;
    let out = args.out.clone().unwrap_or_else(|| config.out_dir.clone());
    std::fs::create_dir_all(&out)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", out.display())))?;
    let ctx = Context { config, out, expensive: args.expensive, n_override: args.n };

    match &cli.command {
        Command::Spectrum(_) => commands::cmd_spectrum(&ctx),
        Command::Check(_) => commands::cmd_check(&ctx),
        Command::Solve(_) => commands::cmd_solve(&ctx),
        Command::Sweep(a) => commands::cmd_sweep(&ctx, a.n_list.as_deref()),
        Command::Simulate(_) => commands::cmd_simulate(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Verdict::Pass) => ExitCode::SUCCESS,
        Ok(Verdict::Fail(msg)) => {
            eprintln!("check failed: {msg}");
            ExitCode::from(1)
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
