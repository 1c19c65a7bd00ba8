use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;

/// Bad flags, settings or input specifications (exit status 2).
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser, Debug)]
#[command(
    name = "athena",
    version,
    about = "Language-model guided tuning of read error correction"
)]
struct Cli {
    /// Worker threads for every parallel stage (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// TOML file with one table per subcommand, e.g. [tune].
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Repeat for more log output on stderr.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a random genome and clean reads sampled from it.
    Simulate(commands::SimulateArgs),
    /// Train an n-gram or character RNN model on reads.
    Train(commands::TrainArgs),
    /// Score reads with a trained model.
    Perplexity(commands::PerplexityArgs),
    /// Inject synthetic errors and write a ledger of every change.
    Inject(commands::InjectArgs),
    /// Correct reads with the built-in corrector or an external tool.
    Correct(commands::CorrectArgs),
    /// Hill-climb the corrector parameter that minimizes perplexity.
    Tune(commands::TuneArgs),
    /// Evaluate perplexity (and gain) over a list of parameter values.
    Sweep(commands::SweepArgs),
    /// Compute EC gain of a correction against ground truth.
    Eval(commands::EvalArgs),
}

fn exit_status(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<UsageError>().is_some() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<athena_core::Error>() {
            match e {
                athena_core::Error::NotFound(_) | athena_core::Error::Argument(_) => return 2,
                _ => return 1,
            }
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .target(env_logger::Target::Stderr)
        .init();

    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure thread pool: {e}");
            return ExitCode::from(1);
        }
    }

    let file = cli.config.as_deref();
    let result = match &cli.command {
        Command::Simulate(a) => commands::simulate(a, file),
        Command::Train(a) => commands::train(a, file),
        Command::Perplexity(a) => commands::perplexity(a, file),
        Command::Inject(a) => commands::inject(a, file),
        Command::Correct(a) => commands::correct(a, file),
        Command::Tune(a) => commands::tune(a, file),
        Command::Sweep(a) => commands::sweep(a, file),
        Command::Eval(a) => commands::eval(a, file),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_status(&e))
        }
    }
}
