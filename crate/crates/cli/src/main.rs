//! `oqs`: run open-system experiments from JSON configs.
//!
//! Exit codes: 0 on success, 2 for configuration errors, 3 for numerical failures.

mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use serde_json::json;

use config::{load_config, Command, ExperimentConfig};
use run::RunError;

#[derive(Debug, Parser)]
#[command(name = "oqs", version, about = "Exact open-quantum-system experiments driven by JSON configs")]
struct Cli {
    /// Optional command name; must match the `command` field of the config.
    #[arg(value_enum)]
    command: Option<CliCommand>,
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output prefix; overrides `output` in the config.
    #[arg(long)]
    out: Option<String>,
    /// Comma-separated seeds; override `seeds` in the config.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Worker threads for sweeps (defaults to all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Validate the config, print every diagnostic and exit.
    #[arg(long)]
    validate_only: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum CliCommand {
    Simulate,
    Divisibility,
    Spinboson,
    MarkovTest,
    Diagnostics,
    NzProjection,
}

impl From<CliCommand> for Command {
    fn from(c: CliCommand) -> Self {
        match c {
            CliCommand::Simulate => Command::Simulate,
            CliCommand::Divisibility => Command::Divisibility,
            CliCommand::Spinboson => Command::Spinboson,
            CliCommand::MarkovTest => Command::MarkovTest,
            CliCommand::Diagnostics => Command::Diagnostics,
            CliCommand::NzProjection => Command::NzProjection,
        }
    }
}

fn prepare(cli: &Cli) -> Result<ExperimentConfig, RunError> {
    let mut cfg = load_config(&cli.config).map_err(RunError::Config)?;
    if let Some(cmd) = cli.command {
        let cmd = Command::from(cmd);
        if cmd != cfg.command {
            return Err(RunError::Config(format!(
                "command: config requests {} but {} was given on the command line",
                cfg.command.name(),
                cmd.name()
            )));
        }
    }
    if let Some(out) = &cli.out {
        cfg.output = out.clone();
    }
    if let Some(seeds) = &cli.seeds {
        cfg.seeds = Some(seeds.clone());
    }
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<(), RunError> {
    let cfg = prepare(cli)?;
    let diagnostics = cfg.validate();
    if cli.validate_only && diagnostics.is_empty() {
        println!("config OK");
        return Ok(());
    }
    if !diagnostics.is_empty() {
        let lines: Vec<String> = diagnostics.iter().map(|d| d.to_string()).collect();
        return Err(RunError::Config(lines.join("\n  ")));
    }
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(RunError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| RunError::Config(format!("--threads: {e}")))?;
    }
    let tol = cfg.tolerances().map_err(|d| RunError::Config(d.to_string()))?;
    let start = Instant::now();
    let outcome = run::run(&cfg, &tol)?;
    let elapsed = start.elapsed().as_secs_f64();

    let csv_path = format!("{}.csv", cfg.output);
    let meta_path = format!("{}.meta.json", cfg.output);
    std::fs::write(&csv_path, outcome.table.to_csv_string()).map_err(|e| RunError::Config(format!("output: {csv_path}: {e}")))?;
    let meta = json!({
        "command": cfg.command.name(),
        "version": oqs_core::VERSION,
        "config": cfg,
        "tolerances": tol,
        "rows": outcome.table.len(),
        "wall_time_seconds": elapsed,
        "results": outcome.results,
    });
    let text = serde_json::to_string_pretty(&meta).map_err(|e| RunError::Config(format!("output: {e}")))?;
    std::fs::write(&meta_path, text + "\n").map_err(|e| RunError::Config(format!("output: {meta_path}: {e}")))?;
    println!("wrote {csv_path} ({} rows) and {meta_path}", outcome.table.len());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
