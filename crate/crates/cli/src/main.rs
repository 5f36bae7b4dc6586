use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use joyce_hk_cli::{catalog, run_crosscheck, run_scan, run_verify, write_scan, CliError, RunConfig};
use serde::Serialize;

/// Verify special Joyce structures and their hyperkähler tensors on a grid.
#[derive(Parser)]
#[command(name = "joyce-hk", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured suites and print a JSON report.
    Verify {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate one tensor entry against its semi-flat value.
    Scan {
        config: PathBuf,
        #[arg(long)]
        observable: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compare the series Joyce function with its dilogarithm ray integral.
    Crosscheck {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List built-in prepotentials and example configs.
    Catalog,
}

fn load(path: &Path, seed: Option<u64>) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(p) => std::fs::write(p, text + "\n")?,
        None => writeln!(io::stdout(), "{text}")?,
    }
    Ok(())
}

fn configure_threads() {
    if let Some(n) = std::env::var("JOYCE_HK_THREADS").ok().and_then(|s| s.parse::<usize>().ok()) {
        // fails only if a pool already exists
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn run(cli: Cli) -> Result<bool, CliError> {
    match cli.command {
        Command::Verify { config, seed, out } => {
            let report = run_verify(&load(&config, seed)?)?;
            emit(&report, out.as_deref())?;
            Ok(report.passed())
        }
        Command::Scan {
            config,
            observable,
            out,
            seed,
        } => {
            let cfg = load(&config, seed)?;
            let rows = run_scan(&cfg, &observable)?;
            write_scan(&rows, cfg.prepotential.n, BufWriter::new(File::create(out)?))?;
            Ok(rows.iter().all(|r| r.status == "ok"))
        }
        Command::Crosscheck { config, seed, out } => {
            let report = run_crosscheck(&load(&config, seed)?)?;
            emit(&report, out.as_deref())?;
            Ok(report.passed())
        }
        Command::Catalog => {
            print!("{}", catalog::render());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    configure_threads();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
