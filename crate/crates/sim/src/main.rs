use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mprx_sim::check;
use mprx_sim::config::SimConfig;
use mprx_sim::records;
use mprx_sim::sweep;
use mprx_sim::SimError;

/// Link-level Monte-Carlo simulator for iterative MIMO-OFDM receivers.
#[derive(Parser)]
#[command(name = "mprx", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the BER/NMSE sweep described by a config file.
    Run {
        /// Path to a key = value config file.
        config: PathBuf,
        /// Worker threads (defaults to the number of CPUs).
        #[arg(long)]
        workers: Option<usize>,
        /// Output directory for results.log and summary.csv.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Aggregate a results file into the summary CSV.
    Summarize {
        /// Path to a results.log produced by `run`.
        results: PathBuf,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Run the quick validation suites (oracle and property checks).
    Check {
        /// Run the full-size suites instead of the quick ones.
        #[arg(long)]
        full: bool,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                SimError::ConfigParse { .. } | SimError::ConfigInvalid(_) => ExitCode::from(2),
                SimError::Io { .. } | SimError::MalformedResults { .. } => ExitCode::from(3),
            }
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, SimError> {
    match cli.command {
        Command::Run { config, workers, out } => {
            let cfg = SimConfig::load(&config)?;
            let workers = workers
                .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            let paths = sweep::run_sweep(&cfg, workers, &out)?;
            eprintln!(
                "wrote {} and {}",
                paths.results_path.display(),
                paths.summary_path.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Summarize { results, csv } => {
            let (cfg, recs) = records::read_results(&results)?;
            let table = records::summarize(&cfg, &recs);
            match csv {
                Some(path) => {
                    std::fs::write(&path, table).map_err(|e| SimError::io(&path, e))?;
                }
                None => print!("{table}"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Check { full } => {
            let reports = if full { check::run_full() } else { check::run_quick() };
            let mut ok = true;
            for r in &reports {
                println!("{}", r.line());
                ok &= r.passed;
            }
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
    }
}
