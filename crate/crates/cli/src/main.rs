use clap::error::ErrorKind;
use clap::Parser;

use drivesim_cli::args::Cli;
use drivesim_cli::{commands, exit};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => exit::OK,
                _ => exit::USAGE,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(f) = commands::run(cli) {
        eprintln!("drivesim: {f}");
        std::process::exit(f.code());
    }
}
