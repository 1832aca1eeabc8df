use std::process::ExitCode;

use clap::Parser;
use fwsvd::cli::{run, Cli, EXIT_OK};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::from(EXIT_OK),
        Err(e) => {
            eprintln!("fwsvd: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
