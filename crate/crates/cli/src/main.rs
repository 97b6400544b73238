use std::process::ExitCode;

use clap::Parser;
use clickcarve_cli::args::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match clickcarve_cli::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let body = serde_json::json!({
                "error": {
                    "category": e.category().as_str(),
                    "code": e.code(),
                    "message": e.to_string(),
                }
            });
            eprintln!("{body}");
            ExitCode::from(clickcarve_cli::exit_code(e.category()))
        }
    }
}
