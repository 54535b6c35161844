//! Batch experiment driver: one command per limit theorem, with JSON
//! configs, deterministic seeds, and CSV/JSON emission for external plotting.

pub mod config;
pub mod drivers;
pub mod report;

use std::fmt;
use std::path::Path;

use config::{ExperimentConfig, OutputFormat};
use report::CommandOutcome;

/// Failure classes, mapped one-to-one onto process exit codes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CliError {
    /// Bad config, schema violation, missing field: exit 2.
    Config(String),
    /// Simulation or numerical failure at runtime: exit 3.
    Numeric(String),
    /// A --check tolerance was not met: exit 4.
    Tolerance(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Tolerance(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Numeric(m) => write!(f, "numeric error: {m}"),
            CliError::Tolerance(m) => write!(f, "tolerance failure: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<pssmp::Error> for CliError {
    fn from(e: pssmp::Error) -> Self {
        match &e {
            // Contract violations surfacing mid-run trace back to the config.
            pssmp::Error::Usage(_) | pssmp::Error::Domain(_) | pssmp::Error::Degenerate(_) => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

/// The eight experiment commands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::Subcommand)]
#[command(rename_all = "snake_case")]
pub enum CommandName {
    /// Weak limit of log(X(T)/T^{1/alpha})/log T against the V law.
    LimitV,
    /// Moments of the normalized occupation clock (Mittag-Leffler limit).
    DarlingKac,
    /// Iterated-logarithm trend of log X(t)/log t over doubling times.
    Lil,
    /// Exponential-functional moments, factorization, left-tail diagnostic.
    Expfun,
    /// Fragmentation: tagged line, mass conservation, empirical measure.
    Frag,
    /// Upper-function classifier for f(t) = t^p.
    IntegralTest,
    /// Short-time stable limit of h(t) log X(t).
    ShortTime,
    /// Log-scale ergodic average of x^{-alpha} along the path.
    Ergodic,
}

impl fmt::Display for CommandName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl CommandName {
    pub fn as_str(&self) -> &'static str {
        match self {
            CommandName::LimitV => "limit_v",
            CommandName::DarlingKac => "darling_kac",
            CommandName::Lil => "lil",
            CommandName::Expfun => "expfun",
            CommandName::Frag => "frag",
            CommandName::IntegralTest => "integral_test",
            CommandName::ShortTime => "short_time",
            CommandName::Ergodic => "ergodic",
        }
    }
}

/// Run one command end to end. In check mode a failed tolerance is an error
/// (exit 4) but the outcome is still returned for report emission.
pub fn run(
    command: CommandName,
    cfg: &ExperimentConfig,
    check: bool,
) -> Result<CommandOutcome, (CliError, Option<CommandOutcome>)> {
    let outcome = drivers::run_command(command, cfg).map_err(|e| (e, None))?;
    if check && !outcome.all_pass() {
        let names: Vec<String> =
            outcome.failures().iter().map(|c| format!("{}: {}", c.name, c.detail)).collect();
        let err = CliError::Tolerance(names.join("; "));
        return Err((err, Some(outcome)));
    }
    Ok(outcome)
}

/// Write the report (or CSV table) atomically: the full payload is rendered
/// first and written in one call, so no partial output survives an error.
pub fn write_output(
    outcome: &CommandOutcome,
    out: &Path,
    format: OutputFormat,
) -> Result<(), CliError> {
    let payload = match format {
        OutputFormat::Json => outcome.report.json(),
        OutputFormat::Csv => outcome.csv.clone(),
    };
    std::fs::write(out, payload)
        .map_err(|e| CliError::Numeric(format!("cannot write {}: {e}", out.display())))
}
