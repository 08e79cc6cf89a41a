//! Command-line front end: matrix ingestion, configuration, and result files.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod io;

use std::time::{SystemTime, UNIX_EPOCH};

use serde_json::json;

pub use cli::{Cli, Command};
pub use config::{Provenance, RunConfig};
pub use error::{CliError, Result};

/// Name of the per-run metadata file; its `run` field is the only content
/// that differs between otherwise identical runs.
pub const METADATA_FILE: &str = "metadata.json";

/// Resolves the configuration, runs the command on a pool of the requested
/// size and writes the run metadata. Returns the files written.
pub fn run(cli: &Cli) -> Result<Vec<String>> {
    let command = &cli.command;
    let mut config = match &command.common().config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    command.apply(&mut config);
    config.validate()?;
    config.out_dir()?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::validation(format!("cannot start thread pool: {e}")))?;
    let (mut output, threads) = pool.install(|| {
        let output = match command {
            Command::Simulate { .. } => commands::simulate(&config),
            Command::Ajive { .. } => commands::ajive(&config),
            Command::Jackstraw { .. } => commands::jackstraw(&config),
            Command::Compare { .. } => commands::compare(&config),
            Command::Diproperm { .. } => commands::diproperm(&config),
            Command::Diagnose { .. } => commands::diagnose(&config),
        };
        output.map(|o| (o, rayon::current_num_threads()))
    })?;

    let timestamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let metadata = json!({
        "provenance": output.provenance,
        "files": output.files,
        "run": { "timestamp_unix": timestamp, "threads": threads },
    });
    let path = config.out_dir()?.join(METADATA_FILE);
    io::write_json(&path, &metadata)?;
    output.files.push(METADATA_FILE.to_string());
    Ok(output.files)
}
