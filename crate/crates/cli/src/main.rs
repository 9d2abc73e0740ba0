mod args;
mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_env("RUST_LOG")
        .init();

    let out_dir = cli.out_dir.unwrap_or_else(|| PathBuf::from("."));
    let result = match cli.command {
        Command::Simulate(a) => commands::simulate(a, &out_dir),
        Command::Estimate(a) => commands::estimate(a, &out_dir),
        Command::Experiment(a) => commands::experiment(a, &out_dir),
        Command::Sweep(a) => commands::sweep(a, &out_dir),
        Command::Baseball(a) => commands::baseball(a, &out_dir),
        Command::Plot(a) => commands::plot(a, &out_dir),
        Command::ValidateConfig(a) => commands::validate_config(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
