//! The `orsearch` command line: ranking, evaluation, ablation, dataset
//! statistics and synthetic data generation.
//!
//! Every command writes its outputs plus a `manifest.json` describing the
//! inputs, so that runs can be reproduced and compared byte for byte.

pub mod commands;
pub mod error;
pub mod io;
pub mod lists;
pub mod manifest;

use std::ffi::OsString;

use clap::{Parser, Subcommand};

pub use error::{CliError, CliResult, EXIT_FORMAT, EXIT_INVARIANT, EXIT_OK, EXIT_USAGE};

#[derive(Debug, Parser)]
#[command(
    name = "orsearch",
    version,
    about = "Objectness- and repulsion-aware person search ranking"
)]
pub struct Cli {
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true, env = "OR_RANK_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rank the gallery for every probe and write one list per probe.
    Rank(commands::rank::RankArgs),
    /// Score ranked lists: mAP and CMC.
    EvalSearch(commands::eval::EvalSearchArgs),
    /// Score the detections themselves: AP and recall.
    EvalDet(commands::eval::EvalDetArgs),
    /// Compare scoring modes over gallery sizes and seeds.
    Ablate(commands::ablate::AblateArgs),
    /// Detection-score histograms and the repulsion pair census.
    Stats(commands::stats::StatsArgs),
    /// Generate a synthetic dataset.
    Synth(commands::synth::SynthArgs),
}

/// Runs a parsed command line on a pool of the requested size.
pub fn run(cli: &Cli) -> CliResult<String> {
    let threads = match cli.threads {
        Some(0) => return Err(CliError::usage("--threads must be at least 1")),
        Some(n) => n,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::usage(format!("cannot start {threads} threads: {e}")))?;
    pool.install(|| dispatch(&cli.command))
}

fn dispatch(command: &Command) -> CliResult<String> {
    use commands::*;
    Ok(match command {
        Command::Rank(a) => {
            let m = rank::run(a)?;
            format!("ranked {} probes into {}", m.details["num_probes"], a.out.display())
        }
        Command::EvalSearch(a) => {
            let m = eval::run_search(a)?;
            format!("evaluated {} probes into {}", m.details["num_probes"], a.out.display())
        }
        Command::EvalDet(a) => {
            eval::run_det(a)?;
            format!("wrote {}", a.out.display())
        }
        Command::Ablate(a) => {
            let (_, ab) = ablate::run(a)?;
            format!("wrote {} reports into {}", ab.cells.len(), a.out.display())
        }
        Command::Stats(a) => {
            stats::run(a)?;
            format!("wrote statistics into {}", a.out.display())
        }
        Command::Synth(a) => {
            let m = synth::run(a)?;
            format!(
                "generated {} detections into {}",
                m.details["num_items"],
                a.out.display()
            )
        }
    })
}

/// Parses `args` (program name first), runs, reports, and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run(&cli) {
        Ok(message) => {
            println!("{message}");
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}
