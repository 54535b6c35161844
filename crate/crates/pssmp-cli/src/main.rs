use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use pssmp_cli::config::{ExperimentConfig, OutputFormat};
use pssmp_cli::{run, write_output, CliError, CommandName};

/// Batch experiment driver for self-similar Markov process limit theorems.
#[derive(Parser)]
#[command(name = "pssmp", version, about)]
struct Cli {
    #[command(subcommand)]
    command: CommandName,
    /// JSON experiment config (spec, alpha, params, seed).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output path for the report or CSV table (default: stdout).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output format override.
    #[arg(long, global = true, value_enum)]
    format: Option<OutputFormat>,
    /// Convert the report into pass/fail against documented tolerances.
    #[arg(long, global = true)]
    check: bool,
    /// Worker thread count (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run_cli(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run_cli(cli: Cli) -> Result<(), CliError> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot configure thread pool: {e}")))?;
    }

    let config_path =
        cli.config.as_ref().ok_or_else(|| CliError::Config("--config is required".into()))?;
    let text = std::fs::read_to_string(config_path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", config_path.display())))?;
    let mut cfg = ExperimentConfig::from_json(&text)?;
    if let Some(seed) = cli.seed {
        cfg.seed = Some(seed);
    }
    let out = cli.out.clone().or_else(|| cfg.out.clone());
    let format = cli.format.or(cfg.format).unwrap_or(OutputFormat::Json);

    let (outcome, check_failure) = match run(cli.command, &cfg, cli.check) {
        Ok(outcome) => (outcome, None),
        // Tolerance failures still carry the finished report; emit it before
        // exiting with code 4 so the evidence is on disk.
        Err((err, Some(outcome))) => (outcome, Some(err)),
        Err((err, None)) => return Err(err),
    };

    match &out {
        Some(path) => write_output(&outcome, path, format)?,
        None => match format {
            OutputFormat::Json => println!("{}", outcome.report.json()),
            OutputFormat::Csv => print!("{}", outcome.csv),
        },
    }
    if out.is_some() {
        // Human-readable one-liner; the machine-readable artifact is in the file.
        eprintln!(
            "{}: {} ({:.1}s)",
            outcome.report.command, outcome.report.verdict, outcome.report.runtime_s
        );
    }

    match check_failure {
        Some(err) => Err(err),
        None => Ok(()),
    }
}
