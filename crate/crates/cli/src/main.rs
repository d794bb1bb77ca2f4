//! `spinforge` command line.
//!
//! Exit codes: 0 success, 1 invalid input, 2 infeasible design, 3 step
//! refinement did not converge, 4 evolution not cyclic, 5 verification
//! failure.

#![recursion_limit = "512"]

mod commands;
mod config;
mod error;
mod output;
mod schema;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::verify::{Fault, VerifyPayload};
use crate::config::{load, Overrides, Task};
use crate::error::{CliError, EXIT_OK, EXIT_SCHEMA};

#[derive(Debug, Parser)]
#[command(name = "spinforge", version, about = "Geometric phase gate design and simulation for two coupled spins")]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Seed for randomized checks; overrides `seed` in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Suppress progress output.
    #[arg(long, global = true)]
    quiet: bool,
    /// Print the JSON schemas of all documents and exit.
    #[arg(long)]
    emit_schema: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesize a pulse for a target gate.
    Design,
    /// Propagate a pulse and record the trajectory and gate.
    Simulate,
    /// Split the gate phases into dynamical and geometric parts.
    Phases,
    /// Run the invariant suite.
    Verify {
        #[arg(long, value_enum, hide = true)]
        inject_fault: Option<Fault>,
    },
    /// Evaluate gate quality over a parameter grid.
    Sweep,
}

fn run(cli: Cli) -> Result<(), CliError> {
    if cli.emit_schema {
        let text = serde_json::to_string_pretty(&schema::all()).expect("schema serialises");
        println!("{text}");
        return Ok(());
    }
    let Some(command) = cli.command else {
        return Err(CliError::schema("no command given; run `spinforge --help`"));
    };
    let path = cli.config.ok_or_else(|| CliError::schema("--config <path> is required"))?;
    let over = Overrides { output: cli.output, seed: cli.seed, quiet: cli.quiet };
    match command {
        Command::Design => {
            let (ctx, p) = load(&path, Task::Design, &over)?;
            commands::design::run(&ctx, &p)
        }
        Command::Simulate => {
            let (ctx, p) = load(&path, Task::Simulate, &over)?;
            commands::simulate::run(&ctx, &p)
        }
        Command::Phases => {
            let (ctx, p) = load(&path, Task::Phases, &over)?;
            commands::phases::run(&ctx, &p)
        }
        Command::Verify { inject_fault } => {
            let (ctx, mut p): (_, Option<VerifyPayload>) = load(&path, Task::Verify, &over)?;
            let p = p.get_or_insert_with(VerifyPayload::default);
            if inject_fault.is_some() {
                p.fault = inject_fault;
            }
            commands::verify::run(&ctx, p)
        }
        Command::Sweep => {
            let (ctx, p) = load(&path, Task::Sweep, &over)?;
            commands::sweep::run(&ctx, &p)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_SCHEMA } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
