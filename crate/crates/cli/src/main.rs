mod args;
mod commands;
mod config;

use std::process::ExitCode;

use clap::Parser;
use sabr_core::SabrError;

use args::{Cli, Command};
use config::FileConfig;

/// A failure of the numerics rather than of the request.
#[derive(Debug)]
pub struct Numerical(pub String);

impl std::fmt::Display for Numerical {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Numerical {}

fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<Numerical>().is_some() {
        return 3;
    }
    for cause in e.chain() {
        if let Some(s) = cause.downcast_ref::<SabrError>() {
            return if s.is_numerical() { 3 } else { 2 };
        }
    }
    2
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let file = FileConfig::load(cli.config.as_deref())?;
    if let Some(n) = cli.workers.or(file.workers) {
        if n == 0 {
            anyhow::bail!("--workers must be positive");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match cli.command {
        Command::Smile(a) => commands::smile(a, &file),
        Command::Generate(a) => commands::generate(a, &file),
        Command::Train(a) => commands::train_cmd(a, &file),
        Command::Evaluate(a) => commands::evaluate(a, &file),
        Command::Price(a) => commands::price(a, &file),
        Command::Bench(a) => commands::bench(a, &file),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
