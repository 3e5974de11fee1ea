use std::process::ExitCode;

use clap::Parser;
use qwsearch_cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(paths) => {
            for p in paths {
                println!("wrote {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("qwsearch: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
