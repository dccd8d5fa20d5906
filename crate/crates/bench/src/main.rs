use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = cgmres_bench::cli::Cli::parse();
    match cgmres_bench::cli::run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("cgmres-bench: solver did not converge");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("cgmres-bench: {e:#}");
            ExitCode::from(2)
        }
    }
}
