//! Command-line entry point for the stress-detection pipeline.
//!
//! Subcommands compose the library stages end to end: `ingest` turns device
//! session directories into canonical CSVs, `featurize` extracts windowed
//! statistics, `pool`/`synthesize` build the segment pool and sample
//! synthetic subjects from it, `train`/`eval`/`predict` handle single
//! models, `experiment` runs the numbered configurations, `fixture gen`
//! fabricates a desk-scale dataset, and `summary` prints per-dataset signal
//! statistics.
//!
//! Every command is deterministic under a fixed seed, writes its artifacts
//! under `--out` next to a `manifest.json` with their hashes, and obeys the
//! exit-code contract: 0 success, 1 usage error, 2 data error.

mod commands;
mod config;
mod manifest;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use crate::config::Ctx;

/// A problem with how the tool was invoked, as opposed to bad data.
/// Commands raise it for invalid flag combinations or values; `main` maps
/// it to exit code 1 and everything else to 2.
#[derive(Debug)]
pub struct UsageError(String);

impl UsageError {
    pub fn new(msg: impl Into<String>) -> UsageError {
        UsageError(msg.into())
    }
}

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser)]
#[command(
    name = "wearstress",
    version,
    about = "Stress detection from wearable EDA/HR recordings",
    propagate_version = true
)]
struct Cli {
    /// TOML config file; explicit flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Base directory for relative data paths (default: $WEARSTRESS_DATA_ROOT).
    #[arg(long, global = true, value_name = "DIR")]
    data_root: Option<PathBuf>,
    /// Cap the worker thread count.
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Align device session directories or registered datasets into canonical CSVs.
    Ingest(commands::IngestArgs),
    /// Extract feature rows from registered datasets into CSVs.
    Featurize(commands::FeaturizeArgs),
    /// Build the labeled segment pool and report its class counts.
    Pool(commands::PoolArgs),
    /// Sample synthetic subjects from the segment pool.
    Synthesize(commands::SynthesizeArgs),
    /// Fit a model on registered datasets and save it as JSON.
    Train(commands::TrainArgs),
    /// Score a saved model against registered datasets.
    Eval(commands::EvalArgs),
    /// Run one numbered experiment configuration.
    Experiment(commands::ExperimentArgs),
    /// Score one session directory with a saved model and optionally plot it.
    Predict(commands::PredictArgs),
    /// Synthetic desk-scale data with a wired registry.
    #[command(subcommand)]
    Fixture(FixtureCmd),
    /// Per-dataset signal statistics: means, SDs, class shares.
    Summary(commands::SummaryArgs),
}

#[derive(Subcommand)]
enum FixtureCmd {
    /// Generate subjects, session directories, canonical CSVs, and a registry.
    Gen {
        /// Number of subjects (at least 2).
        #[arg(long, value_name = "N")]
        subjects: Option<usize>,
        #[arg(long, value_name = "SEED")]
        seed: Option<u64>,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version are requests, not mistakes.
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<UsageError>() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let ctx = Ctx::new(cli.config.as_deref(), cli.data_root)?;
    if let Some(jobs) = ctx.jobs(cli.jobs) {
        if jobs == 0 {
            return Err(UsageError::new("--jobs must be at least 1").into());
        }
        // Ignoring the error keeps a second configuration attempt harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    match cli.command {
        Command::Ingest(args) => commands::ingest(&ctx, args),
        Command::Featurize(args) => commands::featurize(&ctx, args),
        Command::Pool(args) => commands::pool(&ctx, args),
        Command::Synthesize(args) => commands::synthesize(&ctx, args),
        Command::Train(args) => commands::train(&ctx, args),
        Command::Eval(args) => commands::eval(&ctx, args),
        Command::Experiment(args) => commands::experiment(&ctx, args),
        Command::Predict(args) => commands::predict(&ctx, args),
        Command::Fixture(FixtureCmd::Gen { subjects, seed, out }) => {
            commands::fixture_gen(&ctx, subjects, seed, out)
        }
        Command::Summary(args) => commands::summary(&ctx, args),
    }
}
