//! Command-line front end for the `protoselect` library: CSV ingestion,
//! run manifests and the `select`, `criticize`, `rank`, `verify` and `bench`
//! subcommands.

pub mod args;
pub mod commands;
pub mod error;
pub mod input;
pub mod manifest;

pub use error::{CliError, CliResult};

use args::{Cli, Command};

/// Sizes the global worker pool from `--threads`, then `PROTOSELECT_THREADS`.
pub fn configure_threads(flag: Option<usize>) -> CliResult<()> {
    let threads = match flag {
        Some(n) => Some(n),
        None => match std::env::var("PROTOSELECT_THREADS") {
            Ok(v) => Some(v.trim().parse::<usize>().map_err(|_| {
                CliError::Usage(format!("PROTOSELECT_THREADS must be a count, got {v:?}"))
            })?),
            Err(_) => None,
        },
    };
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::Usage("thread count must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    Ok(())
}

pub fn run(cli: &Cli) -> CliResult<()> {
    configure_threads(cli.threads)?;
    match &cli.command {
        Command::Select(a) => commands::run_select(a).map(drop),
        Command::Criticize(a) => commands::run_criticize(a).map(drop),
        Command::Rank(a) => commands::run_rank(a).map(drop),
        Command::Verify(a) => commands::run_verify(a).map(drop),
        Command::Bench(a) => commands::run_bench(a).map(drop),
    }
}
