//! The `clickcarve` command line: dataset synthesis, simulated clicker runs,
//! propagation, reports and the annotation server.

pub mod args;
pub mod commands;
pub mod config;

use clickcarve_core::{ErrorCategory, Result};

use args::{Cli, Command};
use config::FileConfig;

pub fn run(cli: &Cli) -> Result<()> {
    let cfg = FileConfig::load(cli.config.as_deref())?;
    match &cli.command {
        Command::Ingest(a) => commands::ingest(&cfg, a),
        Command::SynthVideo(a) => commands::synth_video(&cfg, a),
        Command::Synth(a) => commands::synth(&cfg, a),
        Command::Simulate(a) => commands::simulate_cmd(&cfg, a),
        Command::Propagate(a) => commands::propagate_cmd(&cfg, a),
        Command::Eval(a) => commands::eval_cmd(&cfg, a),
        Command::Serve(a) => commands::serve_cmd(&cfg, a),
    }
}

/// Process exit status for a failed command. Usage errors from argument
/// parsing also exit with 2.
pub fn exit_code(category: ErrorCategory) -> u8 {
    match category {
        ErrorCategory::InvalidInput => 2,
        ErrorCategory::NotFound => 3,
        ErrorCategory::Conflict => 4,
        ErrorCategory::Io => 5,
    }
}
