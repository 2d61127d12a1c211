//! `mefm` — simulate, fit and test main-effects matrix factor models.

mod commands;
mod io;

use std::fmt;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "mefm",
    version,
    about = "Main-effects matrix factor models: simulation, fitting, rank selection and testing"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a named setting and aggregate Monte Carlo metrics.
    Simulate(SimulateArgs),
    /// Fit a model to a series file and export the decomposition.
    Fit(FitArgs),
    /// Test whether a plain factor model is sufficient for a series.
    Test(TestArgs),
    /// Regenerate the study tables and figure data as CSV.
    Reproduce(ReproduceArgs),
}

#[derive(Args)]
pub struct SimulateArgs {
    /// Named setting (Ia..Ie, IIa..IIe, IIIa..IIIc, IVa..IVc).
    #[arg(long, conflicts_with = "config")]
    setting: Option<String>,
    /// Key=value configuration file instead of a named setting.
    #[arg(long)]
    config: Option<std::path::PathBuf>,
    /// Monte Carlo replications.
    #[arg(long, default_value_t = 100)]
    reps: usize,
    /// Master seed; replication r uses a derived child seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: Option<std::path::PathBuf>,
    /// Override the row dimension.
    #[arg(long)]
    p: Option<usize>,
    /// Override the column dimension.
    #[arg(long)]
    q: Option<usize>,
    /// Series length as a multiple of p*q (rank-study settings).
    #[arg(long)]
    tfactor: Option<f64>,
    /// Override the series length directly.
    #[arg(long, value_name = "T")]
    t: Option<usize>,
    /// Setting-specific signal parameter (u_alpha, u_beta or local support).
    #[arg(long)]
    param: Option<f64>,
    /// Comma list of tasks: fit, ranks, test, normality.
    #[arg(long, default_value = "fit,ranks")]
    tasks: String,
    /// Quantile level for the test task.
    #[arg(long, default_value_t = 0.95)]
    theta: f64,
    /// Also write the first replication's dataset as series.csv.
    #[arg(long)]
    export_series: bool,
    /// Print the resolved configuration and exit.
    #[arg(long)]
    dump_config: bool,
}

#[derive(Args)]
pub struct FitArgs {
    /// Input series (long CSV `t,i,j,value`).
    #[arg(long)]
    input: std::path::PathBuf,
    /// Row rank; requires --kc.
    #[arg(long, requires = "kc", conflicts_with = "auto_rank")]
    kr: Option<usize>,
    /// Column rank; requires --kr.
    #[arg(long, requires = "kr", conflicts_with = "auto_rank")]
    kc: Option<usize>,
    /// Select both ranks with the eigenvalue-ratio estimator.
    #[arg(long)]
    auto_rank: bool,
    /// Output directory.
    #[arg(long)]
    out: std::path::PathBuf,
}

#[derive(Args)]
pub struct TestArgs {
    /// Input series (long CSV `t,i,j,value`).
    #[arg(long)]
    input: std::path::PathBuf,
    /// Quantile level.
    #[arg(long, default_value_t = 0.95)]
    theta: f64,
    /// Core row rank (estimated when omitted).
    #[arg(long, requires = "kc")]
    kr: Option<usize>,
    /// Core column rank (estimated when omitted).
    #[arg(long, requires = "kr")]
    kc: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: std::path::PathBuf,
}

#[derive(Args)]
pub struct ReproduceArgs {
    /// Target: table1, table2, fig_power, fig_consistency or fig_hist.
    #[arg(long)]
    target: String,
    /// Replications per cell.
    #[arg(long, default_value_t = 100)]
    reps: usize,
    /// Master seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: std::path::PathBuf,
}

/// Command error with its process exit code: 2 usage, 3 data, 4 numeric.
#[derive(Debug)]
pub struct CliError {
    kind: ErrorKind,
    message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ErrorKind {
    Usage,
    Data,
    Numeric,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Usage,
            message: message.into(),
        }
    }
    pub fn data(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Data,
            message: message.into(),
        }
    }
    pub fn numeric(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Numeric,
            message: message.into(),
        }
    }
    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::Usage => 2,
            ErrorKind::Data => 3,
            ErrorKind::Numeric => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            ErrorKind::Usage => "usage",
            ErrorKind::Data => "data",
            ErrorKind::Numeric => "numeric",
        };
        write!(f, "{kind}: {}", self.message.replace('\n', " "))
    }
}

impl From<mefm_core::Error> for CliError {
    fn from(err: mefm_core::Error) -> Self {
        match err {
            mefm_core::Error::UnknownSetting(_) => CliError::usage(err.to_string()),
            _ => CliError::numeric(err.to_string()),
        }
    }
}

fn main() {
    if let Ok(raw) = std::env::var("MEFM_THREADS") {
        match raw.parse::<usize>() {
            Ok(n) if n > 0 => mefm_core::configure_threads(n),
            _ => {
                eprintln!("error: usage: MEFM_THREADS must be a positive integer, got `{raw}`");
                std::process::exit(2);
            }
        }
    }
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => commands::simulate::run(&args),
        Command::Fit(args) => commands::fit::run(&args),
        Command::Test(args) => commands::test::run(&args),
        Command::Reproduce(args) => commands::reproduce::run(&args),
    };
    if let Err(err) = result {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}
