use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod output;

use config::{Config, ConfigError};
use output::Format;

#[derive(Debug, Parser)]
#[command(name = "rpa", version, about = "Perceived-risk fields, audits and safety-filtered simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Rasterize cost and perceived-risk fields, safe masks and level sets.
    Field(Common),
    /// Compare model families on one field: inclusiveness and versatility.
    Audit(Common),
    /// Run the closed-loop scenario once per selected spec.
    Simulate(Common),
    /// Barrier-condition margins and control-set probes along the nominal path.
    Feasibility(Common),
}

#[derive(Debug, Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Comma-separated spec names or model kinds (er, cvar, cpt), or "all".
    #[arg(long, default_value = "all")]
    spec: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Runtime(#[from] rpa_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) | CliError::Io(_) => 3,
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    let common = match &command {
        Command::Field(c) | Command::Audit(c) | Command::Simulate(c) | Command::Feasibility(c) => c,
    };
    let cfg = Config::load(&common.config)?;
    let specs = cfg.select(&common.spec)?;
    let out = &common.out;
    match &command {
        Command::Field(c) => commands::field(&cfg, &specs, out, c.format),
        Command::Audit(_) => commands::audit(&cfg, &specs, out),
        Command::Simulate(c) => commands::simulate(&cfg, &specs, out, c.format),
        Command::Feasibility(c) => commands::feasibility(&cfg, &specs, out, c.seed),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rpa: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
