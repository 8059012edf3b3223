//! Command-line front end.
//!
//! ```text
//! ris-bench run <config> [--seed N] [--output PATH] [--workers N]
//! ris-bench mse <config> [...]
//! ris-bench feasibility <config> [...]
//! ris-bench validate <config>
//! ```
//!
//! Exit status is 0 on success, 2 for usage and configuration errors and 1
//! for failures while running. The worker count defaults to the
//! `RIS_WORKERS` environment variable, then to the number of cores.

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::config::ScenarioConfig;
use crate::output::{
    feasibility_csv, sidecar_json, sidecar_path, sweep_csv, write_atomic, FEASIBILITY_SCHEMA, SWEEP_SCHEMA,
};
use crate::sweep::{run_feasibility, run_sweep, SweepOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

pub const WORKERS_ENV: &str = "RIS_WORKERS";

#[derive(Parser, Debug)]
#[command(name = "ris-bench", version, about = "Secure RIS design sweeps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the configured algorithms over the sweep grid.
    Run(RunArgs),
    /// Like `run`, adding the Monte Carlo estimation study at Bob.
    Mse(RunArgs),
    /// Tabulate the minimum feasible Eve trace under equal power.
    Feasibility(RunArgs),
    /// Parse and check a configuration without running it.
    Validate { config: PathBuf },
}

#[derive(Args, Debug)]
struct RunArgs {
    config: PathBuf,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output CSV path.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Worker threads.
    #[arg(long)]
    workers: Option<usize>,
}

fn load(path: &PathBuf) -> Result<ScenarioConfig, i32> {
    ScenarioConfig::from_file(path).map_err(|e| {
        eprintln!("error: {}: {e}", path.display());
        EXIT_USAGE
    })
}

fn workers(flag: Option<usize>) -> Result<Option<usize>, i32> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var(WORKERS_ENV) {
            Ok(v) => Some(v.trim().parse::<usize>().map_err(|_| {
                eprintln!("error: {WORKERS_ENV} must be a positive integer, got `{v}`");
                EXIT_USAGE
            })?),
            Err(_) => None,
        },
    };
    if n == Some(0) {
        eprintln!("error: the worker count must be positive");
        return Err(EXIT_USAGE);
    }
    Ok(n)
}

fn execute(args: RunArgs, mode: &str) -> Result<(), i32> {
    let mut cfg = load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = args.output {
        cfg.output = out;
    }
    let workers = workers(args.workers)?;
    eprintln!("seed: {}", cfg.seed);
    let started = Instant::now();
    let runtime = |e: &dyn std::fmt::Display| {
        eprintln!("error: {e}");
        EXIT_RUNTIME
    };
    if mode == "feasibility" {
        let rows = run_feasibility(&cfg, workers).map_err(|e| runtime(&e))?;
        write_atomic(&cfg.output, &feasibility_csv(&rows)).map_err(|e| runtime(&e))?;
        println!(
            "wrote {} ({} rows, {FEASIBILITY_SCHEMA})",
            cfg.output.display(),
            rows.len()
        );
        return Ok(());
    }
    let opts = SweepOptions {
        mse: mode == "mse",
        workers,
    };
    let rows = run_sweep(&cfg, opts).map_err(|e| runtime(&e))?;
    let elapsed = started.elapsed().as_secs_f64();
    let threads = workers.unwrap_or_else(rayon::current_num_threads);
    write_atomic(&cfg.output, &sweep_csv(&rows)).map_err(|e| runtime(&e))?;
    let meta = sidecar_path(&cfg.output);
    write_atomic(&meta, &sidecar_json(&cfg, SWEEP_SCHEMA, &rows, threads, elapsed)).map_err(|e| runtime(&e))?;
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    println!(
        "wrote {} ({} rows, {SWEEP_SCHEMA}, {failed} failed) and {}",
        cfg.output.display(),
        rows.len(),
        meta.display()
    );
    Ok(())
}

/// Runs the command line `argv` (program name first) and returns the exit
/// status.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Run(a) => execute(a, "run"),
        Command::Mse(a) => execute(a, "mse"),
        Command::Feasibility(a) => execute(a, "feasibility"),
        Command::Validate { config } => load(&config).map(|cfg| {
            println!(
                "{}: ok ({} points x {} algorithms)",
                config.display(),
                cfg.points(),
                cfg.algorithms.len()
            );
        }),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(code) => code,
    }
}
