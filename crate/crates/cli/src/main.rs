use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use horizon_cli::config::{Experiment, ExperimentConfig};
use horizon_cli::{run, CliError};

/// Solve expected-utility portfolio problems with an uncertain horizon and
/// write the results as CSV.
#[derive(Debug, Parser)]
#[command(name = "horizon", version)]
struct Args {
    /// TOML configuration file; reference parameters are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory receiving the CSV files.
    #[arg(long, env = "HORIZON_OUT_DIR", default_value = ".")]
    out_dir: PathBuf,
    /// Overrides the configured experiment.
    #[arg(long, value_enum)]
    experiment: Option<Experiment>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configured number of paths.
    #[arg(long)]
    paths: Option<usize>,
    /// Overrides the configured number of worker threads (0 = one per core).
    #[arg(long)]
    workers: Option<usize>,
    /// Suppresses the summary line on stdout.
    #[arg(long)]
    quiet: bool,
}

fn execute(args: &Args) -> Result<String, CliError> {
    let mut config = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(e) = args.experiment {
        config.experiment = e;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(paths) = args.paths {
        config.n_paths = paths;
    }
    if let Some(workers) = args.workers {
        config.workers = workers;
    }
    run::run(&config, &args.out_dir)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(line) => {
            if !args.quiet {
                println!("{line}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(2)
        }
    }
}
