#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod args;
mod commands;
mod data;
mod error;

use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = args::Cli::parse();
    let result = match cli.command {
        args::Command::FitGrid(a) => commands::fit_grid(&a),
        args::Command::FitLatent(a) => commands::fit_latent(&a),
        args::Command::Bench(a) => commands::bench(&a),
        args::Command::Generate(a) => commands::generate(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
