use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use lyapflex_cli::{exit_code_for, out_path, run, Cli, EXIT_FAILURE};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match run(&cli) {
        Ok(outcome) => outcome,
        Err(err) => {
            eprintln!("error: {err}");
            return ExitCode::from(exit_code_for(&err) as u8);
        }
    };
    let written = match out_path(&cli) {
        Some(path) => std::fs::write(path, &outcome.output),
        None => std::io::stdout().write_all(outcome.output.as_bytes()),
    };
    if let Err(err) = written {
        eprintln!("error: cannot write output: {err}");
        return ExitCode::from(EXIT_FAILURE as u8);
    }
    if outcome.exit_code != 0 {
        eprintln!("error: verification tolerances not met");
    }
    ExitCode::from(outcome.exit_code as u8)
}
