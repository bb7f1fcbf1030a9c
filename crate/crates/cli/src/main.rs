use std::path::PathBuf;
use std::process::ExitCode;

use aspect_rerank_cli::config::BackendKind;
use aspect_rerank_cli::report::{report_text, sweep_table};
use aspect_rerank_cli::{cmd_eval, cmd_paths, cmd_rerank, cmd_sweep, CliError, RunConfig};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "aspect-rerank", version, about = "Goal-driven LLM reranking of recommender candidate lists")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured goal sentence.
    #[arg(long, global = true)]
    goal: Option<String>,
    #[arg(long, global = true)]
    backend: Option<BackendKind>,
    /// Runs a baseline (score_sort, mmr, dpp, upstream) instead of the engine.
    #[arg(long, global = true)]
    baseline: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rerank one user's candidates.
    Rerank {
        #[arg(long)]
        user: String,
    },
    /// Evaluate over every test user.
    Eval,
    /// Aggregate traversal paths.
    Paths {
        /// Existing trace.ndjson; runs the engine when omitted.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Evaluate at several candidate counts.
    Sweep {
        #[arg(long = "n", value_delimiter = ',', required = true)]
        n_values: Vec<usize>,
    },
}

fn load(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(goal) = &cli.goal {
        config.goal = goal.clone();
    }
    if let Some(kind) = cli.backend {
        config.backend.kind = kind;
    }
    if let Some(name) = &cli.baseline {
        config.reranker = name.clone();
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = &cli.out {
        // relative to the working directory, not the config file
        config.out = std::path::absolute(out)?;
    }
    Ok(config)
}

fn run(cli: &Cli) -> Result<String, CliError> {
    let config = load(cli)?;
    match &cli.command {
        Command::Rerank { user } => cmd_rerank(&config, user),
        Command::Eval => cmd_eval(&config).map(|o| report_text(&o)),
        Command::Paths { trace } => cmd_paths(&config, trace.as_deref()).map(|s| s.to_table()),
        Command::Sweep { n_values } => cmd_sweep(&config, n_values).map(|rows| sweep_table(&rows)),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
