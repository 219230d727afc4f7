use std::process::ExitCode;

use clap::{Parser, Subcommand};
use reluplan::commands::{cmd_bench, cmd_gen, cmd_plan, cmd_potentials, BenchArgs, GenArgs, PlanArgs, PotentialsArgs};
use reluplan::CliError;

/// Planning over learned ReLU transition networks.
#[derive(Debug, Parser)]
#[command(name = "reluplan", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic instance JSON.
    Gen(GenArgs),
    /// Compute reward potentials by constraint generation.
    Potentials(PotentialsArgs),
    /// Compile and solve the planning MILP.
    Plan(PlanArgs),
    /// Solve with several encodings and tabulate the results.
    Bench(BenchArgs),
}

fn run(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Gen(a) => cmd_gen(&a).map(|_| 0),
        Command::Potentials(a) => cmd_potentials(&a).map(|_| 0),
        Command::Plan(a) => cmd_plan(&a).map(|o| o.exit_code),
        Command::Bench(a) => cmd_bench(&a).map(|_| 0),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
