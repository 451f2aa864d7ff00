mod args;
mod commands;
mod io;
mod manifest;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("GK_LOG", "warn")).init();
    let cli = Cli::parse();
    let workers = match &cli.command {
        Command::SolveD(a) => a.common.workers,
        Command::KnockoffFilter(a) => a.common.workers,
        Command::Assoc(a) => a.common.workers,
        Command::Meta(a) => a.common.workers,
        Command::Simulate(a) => a.common.workers,
        Command::Pipeline(a) => a.common.workers,
    };
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker threads: {e}");
            return ExitCode::from(2);
        }
    };
    let result = pool.install(|| match &cli.command {
        Command::SolveD(a) => commands::solve_d(a),
        Command::KnockoffFilter(a) => commands::knockoff_filter(a),
        Command::Assoc(a) => commands::assoc(a),
        Command::Meta(a) => commands::meta(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Pipeline(a) => commands::pipeline(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e) as u8)
        }
    }
}
