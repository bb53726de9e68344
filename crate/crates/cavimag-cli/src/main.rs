//! `cavimag` — config-driven magnetization dynamics from the command line.
//!
//! Exit codes: 0 success, 1 operational error (bad config, unreadable file,
//! failed run), 2 benchmark failure — `dicke-bench` ran but a physics
//! tolerance was violated.

mod cmd_bench;
mod cmd_run;
mod cmd_sweep;
mod cmd_validate;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "cavimag",
    version,
    about = "Finite-difference magnetization dynamics, optionally coupled to a single cavity mode"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the simulation described by a config file
    Run(cmd_run::RunArgs),
    /// One run per swept parameter value; emits a parameter-by-frequency map
    Sweep(cmd_sweep::SweepArgs),
    /// Benchmark the engine against the exactly solvable Dicke model
    DickeBench(cmd_bench::BenchArgs),
    /// Parse OVF files and report their structure
    ValidateOvf(cmd_validate::ValidateArgs),
}

/// Flags shared by the simulation-running subcommands.
#[derive(Args)]
pub struct CommonArgs {
    /// Directory for CSV/OVF/log outputs (created if missing)
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Worker threads (default: CAVIMAG_THREADS env var, then all cores)
    #[arg(long)]
    pub threads: Option<usize>,
    /// Suppress console output (the log file is still written)
    #[arg(long)]
    pub quiet: bool,
}

/// Pin the global worker pool: `--threads` wins, then `CAVIMAG_THREADS`,
/// otherwise rayon's default. Must run before any parallel work.
fn configure_threads(flag: Option<usize>) -> Result<(), cavimag::Error> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var("CAVIMAG_THREADS") {
            Ok(v) => Some(v.trim().parse::<usize>().map_err(|_| {
                cavimag::Error::Invalid(format!("CAVIMAG_THREADS={v:?} is not a thread count"))
            })?),
            Err(_) => None,
        },
    };
    if let Some(n) = n {
        if n == 0 {
            return Err(cavimag::Error::Invalid(
                "--threads / CAVIMAG_THREADS must be >= 1".into(),
            ));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| cavimag::Error::Invalid(format!("cannot size thread pool: {e}")))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    // die quietly when the reader of a pipe goes away (`cavimag ... | head`),
    // like other unix filters, instead of panicking mid-println
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::Run(args) => configure_threads(args.common.threads).and_then(|()| cmd_run::exec(args)),
        Cmd::Sweep(args) => {
            configure_threads(args.common.threads).and_then(|()| cmd_sweep::exec(args))
        }
        Cmd::DickeBench(args) => {
            configure_threads(args.common.threads).and_then(|()| cmd_bench::exec(args))
        }
        Cmd::ValidateOvf(args) => return cmd_validate::exec(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
