use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use cvqn_cli::{configure_threads, run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| run(&cli));
    match result {
        Ok(out) => {
            print!("{}", out.table);
            let _ = std::io::stdout().flush();
            for note in out.notes {
                eprintln!("{note}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("cvqn: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
