use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;

use config::RunConfig;

/// Exit code 2 for configuration problems, 1 for failed checks.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Failed(String),
}

#[derive(Parser)]
#[command(name = "gjekit", version, about = "Generated Jacobian equation toolkit")]
struct Cli {
    /// Worker threads (default: GJEKIT_THREADS, else all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Print progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Structure conditions of the generating function.
    Check { config: PathBuf },
    /// Semi-discrete solve; writes the envelope file and convergence log.
    Solve { config: PathBuf },
    /// Monte-Carlo ray trace of a solved reflector.
    Raytrace { config: PathBuf },
    /// Pointwise estimates on random sections of a solved envelope.
    Estimate { config: PathBuf },
    /// End-to-end pipeline for a shipped demo.
    Demo {
        #[arg(value_parser = commands::DEMOS)]
        name: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Print the JSON schema of run configs.
    Schema,
}

fn threads(flag: Option<usize>) -> Result<Option<usize>, CliError> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var("GJEKIT_THREADS") {
        Ok(v) => v.trim().parse().map(Some).map_err(|_| CliError::Config(format!("GJEKIT_THREADS={v:?} is not a thread count"))),
        Err(_) => Ok(None),
    }
}

fn run(cli: Cli) -> Result<bool, CliError> {
    if let Some(n) = threads(cli.threads)? {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Config(e.to_string()))?;
    }
    let with = |path: &PathBuf, f: fn(&RunConfig) -> Result<bool, CliError>| -> Result<bool, CliError> {
        let cfg = RunConfig::load(path)?;
        if cli.verbose {
            eprintln!("config {} (sha256 {})", path.display(), cfg.hash());
        }
        f(&cfg)
    };
    match &cli.command {
        Command::Check { config } => with(config, commands::check),
        Command::Solve { config } => with(config, commands::solve_cmd),
        Command::Raytrace { config } => with(config, commands::raytrace),
        Command::Estimate { config } => with(config, commands::estimate),
        Command::Demo { name, out } => commands::demo(name, out, cli.verbose),
        Command::Schema => {
            print!("{}", config::SCHEMA);
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(CliError::Failed(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(CliError::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
