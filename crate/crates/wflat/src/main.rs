mod cli;
mod io;

use clap::Parser;

fn main() {
    let parsed = match cli::Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    match cli::run(parsed) {
        Ok(()) => {}
        Err(cli::Failure::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            std::process::exit(1);
        }
        Err(cli::Failure::Compute(err)) => {
            eprintln!("error: {err:#}");
            std::process::exit(2);
        }
    }
}
