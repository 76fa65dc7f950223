//! `bugflow` — scriptable analyses over issue-tracker bug corpora.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error. Diagnostics go to
//! stderr; data goes to stdout or `--out`. Identical inputs and seeds produce
//! byte-identical output.

mod commands;
mod common;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use common::parse_format;
use output::OutFormat;

#[derive(Parser)]
#[command(name = "bugflow", version, about = "Bug-resolution workflow analytics and prediction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a raw tracker export into validated bug records.
    Ingest(IngestArgs),
    /// Clean a corpus with the standard rule pipeline and optional prefilters.
    Filter(FilterArgs),
    /// Descriptive statistics over a corpus.
    #[command(subcommand)]
    Stats(StatsCmd),
    /// Fit and query the resolution-time chain model.
    #[command(subcommand)]
    Ctmc(CtmcCmd),
    /// Train and evaluate fast/slow and exact-hours predictors.
    #[command(subcommand)]
    Predict(PredictCmd),
    /// Generate synthetic corpora and inject cleanable noise.
    #[command(subcommand)]
    Synth(SynthCmd),
}

#[derive(Args)]
struct IngestArgs {
    /// Line-delimited raw export.
    #[arg(long)]
    input: PathBuf,
    /// Project profile (workflow, priority labels, issue types).
    #[arg(long)]
    profile: PathBuf,
    /// Output path for bug records; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FilterArgs {
    /// Bug-record corpus to clean.
    #[arg(long)]
    input: PathBuf,
    /// Built-in workflow name (standard, onap, apache).
    #[arg(long)]
    workflow: Option<String>,
    /// Profile file; supplies the workflow and the [filter] defaults.
    #[arg(long)]
    profile: Option<PathBuf>,
    /// Comma-separated resolution statuses to keep.
    #[arg(long)]
    statuses: Option<String>,
    /// Transient-state threshold in seconds.
    #[arg(long)]
    transient_seconds: Option<u64>,
    /// Tukey-fence outlier mode applied after the pipeline.
    #[arg(long)]
    outlier: Option<String>,
    /// Inactivity gap in days; overrides the configured value.
    #[arg(long)]
    inactivity_days: Option<u32>,
    /// Apply the inactivity prefilter.
    #[arg(long)]
    apply_inactivity: bool,
    /// Where to write the filter report (JSON); stderr when omitted.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StatsCommon {
    /// Bug-record corpus.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    workflow: Option<String>,
    #[arg(long)]
    profile: Option<PathBuf>,
    /// Restrict to one priority before computing.
    #[arg(long)]
    priority: Option<u8>,
    #[arg(long, default_value = "csv", value_parser = parse_format)]
    format: OutFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum StatsCmd {
    /// Resolution-status percentages per priority.
    StatusTable {
        #[command(flatten)]
        common: StatsCommon,
        /// Priorities to tabulate, e.g. "1,2".
        #[arg(long, default_value = "1,2")]
        priorities: String,
    },
    /// Most common resolution paths.
    Paths {
        #[command(flatten)]
        common: StatsCommon,
    },
    /// Per-transition sojourn statistics.
    Transitions {
        #[command(flatten)]
        common: StatsCommon,
    },
    /// Top reporters or assignees by volume, ordered by median time.
    Entities {
        #[command(flatten)]
        common: StatsCommon,
        /// reporter or assignee.
        #[arg(long)]
        role: String,
        #[arg(long, default_value_t = 10)]
        top: usize,
        /// Priority whose median orders the output.
        #[arg(long, default_value_t = 2)]
        order_priority: u8,
    },
    /// Self-assigned versus other-assigned medians.
    SelfAssign {
        #[command(flatten)]
        common: StatsCommon,
    },
    /// State occupancy fractions over a time grid.
    Occupancy {
        #[command(flatten)]
        common: StatsCommon,
        /// "default", "log:<start>:<end>:<points>", or comma list of hours.
        #[arg(long, default_value = "default")]
        grid: String,
    },
}

#[derive(Subcommand)]
enum CtmcCmd {
    /// Build the chain model from a cleaned corpus.
    Fit {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        workflow: Option<String>,
        #[arg(long)]
        profile: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Analytic resolution-time CDF of a saved model.
    Cdf {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value = "default")]
        grid: String,
        #[arg(long, default_value = "csv", value_parser = parse_format)]
        format: OutFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo empirical CDF of a saved model.
    Simulate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "default")]
        grid: String,
        #[arg(long, default_value = "csv", value_parser = parse_format)]
        format: OutFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Validate a model file and re-emit it in canonical form.
    Export {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct NnFlags {
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    #[arg(long, default_value_t = 32)]
    batch: usize,
    #[arg(long, default_value_t = 1e-3)]
    learning_rate: f64,
    #[arg(long, default_value_t = 5)]
    knn_k: usize,
}

#[derive(Subcommand)]
enum PredictCmd {
    /// Train one model on the whole corpus and save it.
    Train {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        workflow: Option<String>,
        #[arg(long)]
        profile: Option<PathBuf>,
        /// knn, naive_bayes, nn_binary, or nn_regression.
        #[arg(long)]
        model_kind: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        nn: NnFlags,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a saved model on a corpus.
    Eval {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        workflow: Option<String>,
        #[arg(long)]
        profile: Option<PathBuf>,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value = "csv", value_parser = parse_format)]
        format: OutFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Repeated random-split cross-validation.
    Cv {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        workflow: Option<String>,
        #[arg(long)]
        profile: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        repeats: usize,
        /// Comma-separated model kinds; defaults to all four.
        #[arg(long)]
        models: Option<String>,
        /// none, mild, extreme, or inactivity.
        #[arg(long, default_value = "none")]
        filter_variant: String,
        #[arg(long, default_value_t = 0.8)]
        train_fraction: f64,
        #[arg(long, default_value_t = 30)]
        inactivity_days: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        nn: NnFlags,
        #[arg(long, default_value = "csv", value_parser = parse_format)]
        format: OutFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum SynthCmd {
    /// Sample a corpus from a generator spec; writes the raw export schema.
    Generate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Where to write the ground-truth table.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Plant cleanable noise into a bug-record corpus.
    Inject {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        workflow: Option<String>,
        #[arg(long)]
        profile: Option<PathBuf>,
        /// Where to write the injection ledger (JSON); stderr when omitted.
        #[arg(long)]
        ledger: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Ingest(args) => commands::ingest(args),
        Command::Filter(args) => commands::filter(args),
        Command::Stats(cmd) => commands::stats(cmd),
        Command::Ctmc(cmd) => commands::ctmc(cmd),
        Command::Predict(cmd) => commands::predict(cmd),
        Command::Synth(cmd) => commands::synth(cmd),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
