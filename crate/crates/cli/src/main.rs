use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

mod config;
mod report;
mod scenarios;

use config::Config;

#[derive(Parser)]
#[command(name = "polyfold", version, about = "Reproducible scenario runner for polyfold-core")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the scenario catalog.
    List,
    /// Run one scenario and write its artifacts.
    Run {
        name: String,
        /// TOML configuration (schema version 1).
        #[arg(long, value_name = "PATH")]
        config: Option<PathBuf>,
        /// Artifact directory; defaults to `out/<name>`.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        /// Seed overriding the configuration.
        #[arg(long, value_name = "N")]
        seed: Option<u64>,
        /// Suppress per-check output.
        #[arg(long)]
        quiet: bool,
    },
    /// Print the default configuration.
    Config,
}

fn run(name: &str, config: Option<PathBuf>, out: Option<PathBuf>, seed: Option<u64>, quiet: bool) -> Result<bool> {
    let scenario = scenarios::find(name)?;
    let mut cfg = match config {
        Some(path) => Config::load(&path)?,
        None => Config::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let report = scenario.run(&cfg)?;
    let dir = out.unwrap_or_else(|| PathBuf::from("out").join(name));
    report.write(&dir)?;
    if !quiet {
        print!("{}", report.render_checks());
        let verdict = if report.passed() { "PASS" } else { "FAIL" };
        println!("{verdict}  {name} (seed {}) -> {}", cfg.seed, dir.display());
    }
    Ok(report.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::List => {
            print!("{}", scenarios::catalog_text());
            ExitCode::SUCCESS
        }
        Command::Config => {
            print!("{}", Config::default().to_toml());
            ExitCode::SUCCESS
        }
        Command::Run {
            name,
            config,
            out,
            seed,
            quiet,
        } => match run(&name, config, out, seed, quiet) {
            Ok(true) => ExitCode::SUCCESS,
            Ok(false) => ExitCode::from(1),
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::from(2)
            }
        },
    }
}
