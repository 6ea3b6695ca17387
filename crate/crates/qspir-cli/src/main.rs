use std::process::ExitCode;

use clap::Parser;

use qspir_cli::commands::{cmd_audit, cmd_rates, cmd_selftest, cmd_simulate, CliError, Exit};
use qspir_cli::opts::{Cli, Command};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let budget = std::env::var("QSPIR_BUDGET").ok();
    let result = match &cli.command {
        Command::Rates(c) => c.resolve(budget).map_err(CliError::from).and_then(|c| cmd_rates(&c)),
        Command::Simulate(c) => c.resolve(budget).map_err(CliError::from).and_then(|c| cmd_simulate(&c)),
        Command::Audit(a) => a.resolve(budget).map_err(CliError::from).and_then(|c| cmd_audit(&c)),
        Command::Selftest(c) => c.resolve(budget).map_err(CliError::from).and_then(|c| cmd_selftest(&c)),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("qspir: {e}");
            ExitCode::from(Exit::Usage as u8)
        }
    }
}
