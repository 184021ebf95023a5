//! Command-line front end: deterministic permutation importance, the
//! correlation-aware systemic variant, the random-permutation baseline, a
//! synthetic benchmark grid, ranking-stability analysis, bundled case-study
//! data, and a protocol server for saved models.
//!
//! Exit codes: 0 success, 2 configuration/input error, 3 predictor or solver
//! failure, 4 degenerate importance (all scores zero), 5 benchmark finished
//! with partial failures.

mod commands;
mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "permvi", version, about = "Permutation variable importance without the randomness: one deterministic permutation per feature, plus a correlation-aware systemic variant.")]
struct Cli {
    /// `key = value` config file; command-line flags override file entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (default: all cores). Results are identical for any
    /// thread count.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Deterministic single-permutation importance; optionally also the
    /// random-permutation baseline and the budget check against it.
    Importance(commands::ImportanceArgs),
    /// Correlation-aware importance: propagate each perturbation to
    /// correlated features and decompose into direct + indirect parts.
    Systemic(commands::SystemicArgs),
    /// Synthetic benchmark grid scoring every method against known
    /// coefficient-based importance.
    Benchmark(commands::BenchmarkArgs),
    /// Top-k ranking stability across repeated runs.
    Stability(commands::StabilityArgs),
    /// Write the bundled case-study datasets to disk.
    FetchData(commands::FetchDataArgs),
    /// Serve a saved linear model over the line-based prediction protocol
    /// (stdin/stdout), for self-hosted external-predictor runs.
    Serve(commands::ServeArgs),
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let code = match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            e.exit_code()
        }
    };
    std::process::exit(code);
}

fn run(cli: &Cli) -> permvi::Result<i32> {
    let cfg = config::FileConfig::load(cli.config.as_deref())?;
    if let Some(threads) = cfg.resolve_opt(cli.threads, "threads")? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| permvi::Error::InvalidArgument(format!("thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Importance(args) => commands::cmd_importance(args, &cfg),
        Command::Systemic(args) => commands::cmd_systemic(args, &cfg),
        Command::Benchmark(args) => commands::cmd_benchmark(args, &cfg),
        Command::Stability(args) => commands::cmd_stability(args, &cfg),
        Command::FetchData(args) => commands::cmd_fetch_data(args, &cfg),
        Command::Serve(args) => commands::cmd_serve(args),
    }
}
