mod args;
mod commands;

use clap::Parser;

use args::{Cli, Command};

fn main() {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let outcome = match &cli.command {
        Command::Generate(a) => commands::generate(a),
        Command::Train(a) => commands::train_one(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Landscape(a) => commands::landscape(a),
        Command::Analyze(a) => commands::analyze(a),
    };
    if let Err(f) = outcome {
        eprintln!("error: {}", f.message);
        std::process::exit(f.code);
    }
}
