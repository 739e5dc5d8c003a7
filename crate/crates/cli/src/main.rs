use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use urlflow_cli::commands;
use urlflow_cli::{CliError, RunConfig};
use urlflow_core::events::NewsClass;

#[derive(Parser)]
#[command(
    name = "urlflow",
    version,
    about = "Cross-community URL-sharing analytics: Hawkes influence estimation and temporal statistics"
)]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Override the config's run seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the config's worker count.
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Abort on the first per-URL fit failure instead of skipping it.
    #[arg(long, global = true)]
    strict: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a raw event log (CSV or NDJSON) into a normalized event store.
    Ingest {
        /// Raw event log.
        input: PathBuf,
    },
    /// Draw synthetic event stores from a saved parameter bundle.
    Simulate {
        /// Directory holding lambda0.csv, W.csv, G.csv, grid.csv.
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        n_urls: usize,
        /// Length of each simulated series, in bins.
        #[arg(long)]
        t_bins: usize,
        /// News class stamped on the synthetic events.
        #[arg(long, default_value = "mainstream")]
        news_class: String,
    },
    /// Fit per-URL Hawkes posteriors over a store.
    Fit {
        /// Normalized event store (from ingest or simulate).
        #[arg(long)]
        store: PathBuf,
    },
    /// Aggregate posteriors into influence matrices, percentages, and KS
    /// significance.
    Influence {
        #[arg(long)]
        posteriors: PathBuf,
        #[arg(long)]
        store: PathBuf,
    },
    /// Sequence tables, lag CDFs, daily occurrence, and flow graphs.
    Temporal {
        #[arg(long)]
        store: PathBuf,
    },
    /// Influence and temporal outputs in one run.
    Report {
        #[arg(long)]
        posteriors: PathBuf,
        #[arg(long)]
        store: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config_path = cli
        .config
        .ok_or_else(|| CliError::Usage("--config PATH is required".to_string()))?;
    let out_dir = cli
        .out
        .ok_or_else(|| CliError::Usage("--out DIR is required".to_string()))?;
    let mut config = RunConfig::load(&config_path)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(workers) = cli.workers {
        if workers == 0 {
            return Err(CliError::Usage("--workers must be at least 1".to_string()));
        }
        config.workers = workers;
    }

    match cli.command {
        Command::Ingest { input } => {
            commands::cmd_ingest(&config, &config_path, &input, &out_dir)?;
        }
        Command::Simulate {
            params,
            n_urls,
            t_bins,
            news_class,
        } => {
            let class = NewsClass::parse(&news_class).ok_or_else(|| {
                CliError::Usage(format!(
                    "--news-class must be alternative or mainstream, got {news_class:?}"
                ))
            })?;
            commands::cmd_simulate(
                &config,
                &config_path,
                &params,
                n_urls,
                t_bins,
                class,
                &out_dir,
            )?;
        }
        Command::Fit { store } => {
            commands::cmd_fit(&config, &config_path, &store, &out_dir, cli.strict)?;
        }
        Command::Influence { posteriors, store } => {
            commands::cmd_influence(&config, &config_path, &posteriors, &store, &out_dir)?;
        }
        Command::Temporal { store } => {
            commands::cmd_temporal(&config, &config_path, &store, &out_dir)?;
        }
        Command::Report { posteriors, store } => {
            commands::cmd_report(&config, &config_path, &posteriors, &store, &out_dir)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let is_help = matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let _ = e.print();
            return if is_help {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
