//! `collision`: experiments with collision-model thermalizing channels.
//!
//! Exit codes: 0 on success, 1 when a verification or self-check fails,
//! 2 for invalid usage or parameters.

mod args;
mod commands;
mod table;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{Map, Value};

use commands::{ChannelInfoArgs, EntangleArgs, ScrambleArgs, ThermalizeArgs};
use table::{Format, ResultTable};
use verify::VerifyArgs;

#[derive(Debug, Parser)]
#[command(name = "collision", version, about = "Collision-model thermalization of qubits", long_about = None)]
struct Cli {
    /// Write the table to this file instead of stdout
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Seed for every random draw (Monte Carlo sampling, verification draws)
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Relax a qubit (d, k) through n collisions
    Thermalize(ThermalizeArgs),
    /// Coherence multiplier, relaxation times and self-checks of one channel
    ChannelInfo(ChannelInfoArgs),
    /// Entanglement of system and bath after n zero-temperature collisions
    Entangle(EntangleArgs),
    /// Fidelity of undoing the collisions after shuffling the bath qubits
    Scramble(ScrambleArgs),
    /// Run the cross-check suite
    Verify(VerifyArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Thermalize(_) => "thermalize",
            Command::ChannelInfo(_) => "channel-info",
            Command::Entangle(_) => "entangle",
            Command::Scramble(_) => "scramble",
            Command::Verify(_) => "verify",
        }
    }
}

#[derive(Debug)]
pub enum Failure {
    /// Bad flags or parameters; exit code 2.
    Usage(String),
    /// A self-check did not hold; exit code 1.
    Check(String),
    Io(std::io::Error),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Check(_) | Failure::Io(_) => 1,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "{m}"),
            Failure::Check(m) => write!(f, "check failed: {m}"),
            Failure::Io(e) => write!(f, "{e}"),
        }
    }
}

impl From<collision_core::Error> for Failure {
    fn from(e: collision_core::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

/// Command-line arguments with `--output` removed: re-running them writes the
/// same table.
fn invocation() -> Vec<String> {
    let mut out = Vec::new();
    let mut args = std::env::args().skip(1);
    while let Some(a) = args.next() {
        if a == "--output" {
            args.next();
        } else if !a.starts_with("--output=") {
            out.push(a);
        }
    }
    out
}

fn metadata(cli: &Cli) -> Map<String, Value> {
    let mut meta = Map::new();
    meta.insert("tool".into(), "collision".into());
    meta.insert("version".into(), env!("CARGO_PKG_VERSION").into());
    meta.insert("command".into(), cli.command.name().into());
    meta.insert("seed".into(), cli.seed.into());
    meta.insert("invocation".into(), invocation().into());
    meta
}

fn emit(cli: &Cli, table: &ResultTable) -> Result<(), Failure> {
    let text = table.render(cli.format);
    match &cli.output {
        Some(path) => std::fs::write(path, text).map_err(Failure::Io),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let meta = metadata(cli);
    let table = match &cli.command {
        Command::Thermalize(a) => commands::thermalize(a, meta)?,
        Command::ChannelInfo(a) => commands::channel_info(a, meta)?,
        Command::Entangle(a) => commands::entangle(a, meta)?,
        Command::Scramble(a) => commands::scramble(a, cli.seed, meta)?,
        Command::Verify(a) => {
            let outcomes = verify::run_checks(a, cli.seed)?;
            for o in &outcomes {
                println!("{} {}: {}", if o.passed { "PASS" } else { "FAIL" }, o.name, o.detail);
            }
            let failed: Vec<&str> = outcomes.iter().filter(|o| !o.passed).map(|o| o.name).collect();
            println!("{} checks, {} failed", outcomes.len(), failed.len());
            if cli.output.is_some() {
                emit(cli, &verify::report_table(&outcomes, a, meta))?;
            }
            if !failed.is_empty() {
                return Err(Failure::Check(failed.join(", ")));
            }
            return Ok(());
        }
    };
    emit(cli, &table)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}
