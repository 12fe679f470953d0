use std::process::ExitCode;

use clap::Parser;
use fstress_cli::{run, Cli, EXIT_INVALID};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = std::io::stdout();
    match run(cli, &mut stdout.lock()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("fstress: {e}");
            ExitCode::from(EXIT_INVALID)
        }
    }
}
