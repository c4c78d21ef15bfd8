//! `ambigeo`: batch pipeline for embedding-geometry analyses.
//!
//! Exit codes: 0 success, 1 internal error, 2 bad input.

mod commands;
mod error;
mod manifest;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::error::CliResult;

#[derive(Parser, Debug)]
#[command(name = "ambigeo", version, about = "Geometry of word meanings in contextual-embedding space")]
struct Cli {
    /// Worker threads for data-parallel kernels (default: all cores).
    #[arg(long, global = true, env = "AMBIGEO_THREADS")]
    threads: Option<usize>,

    /// Log progress to stderr (-vv for debug detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build ~N-word context windows around target-word occurrences.
    Windows(commands::windows::Args),
    /// Mean pairwise cosine distance of every embedding file in a directory.
    Diversity(commands::diversity::Args),
    /// Regression or factorial statistics of diversity by condition.
    Simulate(commands::simulate::Args),
    /// t-SNE, proxigram, group similarity and classification for one word.
    Casestudy(commands::casestudy::Args),
    /// Agreement between automatic labels and human raters.
    Agreement(commands::agreement::Args),
    /// Group status by word interaction model over two pair files.
    Interaction(commands::interaction::Args),
    /// Synthetic ambiguity experiment from a profile config.
    Synth(commands::synth::Args),
}

fn configure_threads(threads: Option<usize>) -> CliResult<()> {
    match threads {
        Some(0) => Err(error::user_error("--threads must be at least 1")),
        #[cfg(feature = "parallel")]
        Some(n) => {
            rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
            Ok(())
        }
        #[cfg(not(feature = "parallel"))]
        Some(_) => {
            log::warn!("built without the parallel feature; --threads has no effect");
            Ok(())
        }
        None => Ok(()),
    }
}

fn run(cli: Cli) -> CliResult<()> {
    configure_threads(cli.threads)?;
    match cli.command {
        Command::Windows(a) => commands::windows::run(a),
        Command::Diversity(a) => commands::diversity::run(a),
        Command::Simulate(a) => commands::simulate::run(a),
        Command::Casestudy(a) => commands::casestudy::run(a),
        Command::Agreement(a) => commands::agreement::run(a),
        Command::Interaction(a) => commands::interaction::run(a),
        Command::Synth(a) => commands::synth::run(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
