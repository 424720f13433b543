use std::process::ExitCode;

use clap::Parser;
use tubeforge::cli::{self, Cli};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("TUBEFORGE_LOG", "warn")).init();
    let cli = Cli::parse();
    match cli::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let category = e.category();
            eprintln!("{}: {e}", category.code());
            ExitCode::from(category.exit_code() as u8)
        }
    }
}
