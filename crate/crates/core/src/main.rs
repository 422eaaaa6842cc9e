use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use logswitch::cli::{self, Experiment, Overrides, SEED_ENV};

/// Simulation and Monte Carlo analysis of regime-switching stochastic
/// logistic models.
#[derive(Debug, Parser)]
#[command(name = "logswitch", version)]
struct Args {
    /// Experiment file (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed; overrides the environment and the experiment file.
    #[arg(long, global = true, env = SEED_ENV)]
    seed: Option<u64>,

    /// Output directory; overrides the experiment file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Stationary distribution of the chain and the long-run class.
    Classify,
    /// One sample path per selected scheme, written as CSV.
    Simulate,
    /// Strong-error curve over a list of step sizes and its log-log slope.
    Converge,
    /// Lyapunov exponent, moment bounds and time average.
    Longrun,
    /// Histogram of X(T) and the Kolmogorov-Smirnov test against the Gamma law.
    Stationary,
    /// Blow-up frequency of classical Euler-Maruyama.
    Blowup,
}

fn run(args: Args) -> logswitch::Result<()> {
    let path = args
        .config
        .ok_or_else(|| logswitch::Error::InvalidParameter {
            key: "config".into(),
            reason: "--config <path> is required".into(),
        })?;
    let overrides = Overrides {
        seed: args.seed,
        out: args.out,
        workers: args.workers,
    };
    let exp = Experiment::load(&path, &overrides)?;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match args.command {
        Command::Classify => cli::cmd_classify(&exp, &mut out)?,
        Command::Simulate => cli::cmd_simulate(&exp, &mut out)?,
        Command::Converge => cli::cmd_converge(&exp, &mut out)?,
        Command::Longrun => cli::cmd_longrun(&exp, &mut out)?,
        Command::Stationary => cli::cmd_stationary(&exp, &mut out)?,
        Command::Blowup => cli::cmd_blowup(&exp, &mut out)?,
    }
    out.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
