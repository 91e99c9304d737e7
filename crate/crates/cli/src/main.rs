use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use viability_cli::commands::{error_exit_code, EXIT_USAGE};
use viability_cli::{
    cmd_check, cmd_fit, cmd_kernel, cmd_simulate, ConfigError, OutputOptions, RunConfig, RunReport,
};

/// Thread count for the grid loop; unset means one per core.
const THREADS_ENV: &str = "VIAB_THREADS";

#[derive(Parser)]
#[command(
    name = "viab",
    version,
    about = "Viability kernels for harvested predator-prey systems"
)]
struct Cli {
    /// Run configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Also write an SVG plot.
    #[arg(long, global = true)]
    svg: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the closed-form kernel's hypotheses.
    Check,
    /// Compute the grid kernel and compare it with the closed form.
    Kernel,
    /// Simulate a feedback policy.
    Simulate,
    /// Fit the model parameters to an observation file.
    Fit {
        /// Observation CSV; overrides `fit.data`.
        #[arg(long)]
        data: Option<PathBuf>,
    },
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .with_context(|| format!("{THREADS_ENV}=`{raw}` is not a positive integer"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()?;
    Ok(())
}

fn run(cli: Cli) -> Result<RunReport> {
    let path = cli
        .config
        .ok_or_else(|| ConfigError::Missing("--config <path>".into()))?;
    let cfg = RunConfig::load(&path)?;
    let out = OutputOptions {
        dir: cli
            .out
            .or_else(|| cfg.output.dir.clone())
            .unwrap_or_else(|| PathBuf::from("out")),
        svg: cli.svg || cfg.output.svg,
    };
    match cli.command {
        Command::Check => cmd_check(&cfg),
        Command::Kernel => cmd_kernel(&cfg, &out),
        Command::Simulate => cmd_simulate(&cfg, &out),
        Command::Fit { data } => cmd_fit(&cfg, data.as_deref(), &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(EXIT_USAGE);
    }
    match run(cli) {
        Ok(report) => {
            println!("{report}");
            ExitCode::from(report.exit_code)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(error_exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }
}
