//! Command-line front end: `simulate`, `fit`, `check-id`, `evaluate` and
//! `replicate`, driven by a TOML run configuration with flag overrides.
//!
//! Exit codes: 0 on success, 2 for configuration errors, 3 for data errors
//! and 4 for numerical aborts.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod truth;

pub use args::{Cli, Command};
pub use config::RunConfig;
pub use error::{CliError, CliResult};

/// Resolves the configuration and runs the selected subcommand, inside a
/// dedicated thread pool when `--jobs` is set.
pub fn run(cli: &Cli) -> CliResult<()> {
    let base = match &cli.global.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let cfg = cli.merge(base);
    let verbose = cli.global.verbose;
    let work = || -> CliResult<()> {
        match &cli.command {
            Command::Simulate(_) => {
                let r = commands::cmd_simulate(&cfg, verbose)?;
                println!(
                    "simulated {} x {} dataset into {} (config {})",
                    r.output.dataset.n(),
                    r.output.dataset.p(),
                    r.dir.display(),
                    r.config_hash
                );
            }
            Command::Fit(_) => {
                let r = commands::cmd_fit(&cfg, verbose)?;
                println!(
                    "kept {} draws in {} (config {})",
                    r.draws.iterations.len(),
                    r.dir.display(),
                    r.config_hash
                );
            }
            Command::CheckId(_) => {
                print!("{}", commands::json(&commands::cmd_check_id(&cfg, verbose)?)?);
            }
            Command::Evaluate(_) => {
                print!("{}", commands::json(&commands::cmd_evaluate(&cfg, verbose)?)?);
            }
            Command::Replicate(_) => {
                let r = commands::cmd_replicate(&cfg, verbose)?;
                print!("{}", commands::json(&r.aggregates)?);
            }
        }
        Ok(())
    };
    match cfg.jobs {
        Some(0) => error::config_err("--jobs must be at least 1"),
        Some(jobs) => rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .or_else(|e| error::config_err(format!("cannot start {jobs} threads: {e}")))?
            .install(work),
        None => work(),
    }
}
