use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use trbeam_cli::config::EXPERIMENTS;
use trbeam_cli::{run_experiment, CliError, ExperimentConfig, Format};

/// Runs a TR/ETR link experiment and writes its tables.
#[derive(Debug, Parser)]
#[command(name = "trbeam", version)]
struct Args {
    /// Experiment name (overrides the config file).
    #[arg(long)]
    experiment: Option<String>,
    /// TOML config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Channel realizations per configuration.
    #[arg(long)]
    realizations: Option<u64>,
    /// Symbols per realization.
    #[arg(long)]
    symbols: Option<usize>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Use 1000 realizations of 10^6 symbols.
    #[arg(long)]
    full_scale: bool,
    /// List the built-in experiments and exit.
    #[arg(long)]
    list: bool,
}

fn threads_from_env() -> Result<Option<usize>, CliError> {
    match std::env::var("TRBEAM_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|_| CliError::Config(format!("TRBEAM_THREADS must be a positive integer, got {v:?}"))),
        Err(_) => Ok(None),
    }
}

fn build(args: Args) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::from_path(path)?,
        None => ExperimentConfig::new(""),
    };
    if let Some(e) = args.experiment {
        cfg.experiment = e;
    }
    if cfg.experiment.is_empty() {
        return Err(CliError::Config("no experiment given (use --experiment or [experiment] name)".into()));
    }
    if let Some(out) = args.out {
        cfg.output_dir = out;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(r) = args.realizations {
        cfg.link.realizations = Some(r);
    }
    if let Some(s) = args.symbols {
        cfg.link.symbols = Some(s);
    }
    if let Some(f) = args.format {
        cfg.format = f;
    }
    cfg.full_scale |= args.full_scale;
    cfg.threads = threads_from_env()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let args = Args::parse();
    if args.list {
        for e in EXPERIMENTS {
            println!("{e}");
        }
        return ExitCode::SUCCESS;
    }
    match build(args).and_then(|cfg| run_experiment(&cfg)) {
        Ok(out) => {
            for f in &out.files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("trbeam: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
