use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod output;

use commands::CliError;

#[derive(Parser, Debug)]
#[command(name = "ammq", version, about = "Optimal markups for price-aware AMMs")]
struct Cli {
    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "ammq-out")]
    out: PathBuf,
    /// Overrides `simulation.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides `simulation.n_paths`.
    #[arg(long, global = true)]
    paths: Option<usize>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve for the value function and write the surface.
    Solve {
        /// System to solve; defaults to the one implied by the configuration.
        #[arg(long)]
        model: Option<String>,
    },
    /// Tabulate quotes from a surface (or a fresh solve).
    QuoteTable {
        /// Binary surface; overrides `quote_table.surface`.
        #[arg(long)]
        surface: Option<PathBuf>,
    },
    /// Estimate the objective of every configured policy.
    Simulate,
    /// Paired comparison of the configured policies on common random numbers.
    Compare,
    /// Check the configuration and list every violation.
    Validate,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("AMMQ_LOG", "warn")).init();
    // Usage errors are user errors (1); clap would exit with 2.
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::User("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::User(format!("thread pool: {e}")))?;
    }
    let config = cli
        .config
        .clone()
        .ok_or_else(|| CliError::User("--config <path> is required".into()))?;
    let ctx = commands::Context {
        config_path: config,
        out: cli.out,
        seed: cli.seed,
        paths: cli.paths,
    };
    match cli.command {
        Command::Solve { model } => commands::solve(&ctx, model.as_deref()),
        Command::QuoteTable { surface } => commands::quote_table(&ctx, surface),
        Command::Simulate => commands::simulate(&ctx),
        Command::Compare => commands::compare(&ctx),
        Command::Validate => commands::validate(&ctx),
    }
}
