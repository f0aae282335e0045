use std::process::ExitCode;

use clap::Parser;

use simplicial_gap_cli::{execute, Cli, CliError, EXIT_FAILED};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match execute(&cli) {
        Ok(outcome) => {
            let written = match &cli.common.out {
                Some(path) => std::fs::write(path, &outcome.body).map_err(|e| {
                    CliError::Failure(format!("cannot write {}: {e}", path.display()))
                }),
                None => {
                    print!("{}", outcome.body);
                    Ok(())
                }
            };
            match written {
                Ok(()) => outcome.code,
                Err(e) => {
                    eprintln!("{e}");
                    EXIT_FAILED
                }
            }
        }
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
