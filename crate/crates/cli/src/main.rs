//! gridlof: IEC 104 traffic profiling and anomaly detection.
//!
//! One binary wires the pipeline end to end: extract records from a
//! capture, generate or attack synthetic traffic, train a timing model,
//! detect outliers, validate against held-out data, and benchmark the
//! fit. Exit codes: 0 success, 1 outliers found under
//! `--fail-on-outlier`, 2 usage problems, 3 data problems.

mod commands;
mod config;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "gridlof", version, about = "LOF-based anomaly detection for IEC 104 traffic")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a PCAP capture into the record CSV
    Extract(ExtractArgs),
    /// Generate synthetic periodic IEC 104 traffic
    Generate(GenerateArgs),
    /// Apply a labeled attack scenario to a record CSV
    Inject(InjectArgs),
    /// Fit a LOF model on a record CSV and save it
    Train(TrainArgs),
    /// Detect outliers in a record CSV
    Detect(DetectArgs),
    /// Train on the leading fraction, score the rest, report FP/TP rates
    Validate(ValidateArgs),
    /// Time model fitting over fixed-size windows
    Bench(BenchArgs),
}

#[derive(Args)]
struct ExtractArgs {
    /// Input capture (classic PCAP, Ethernet link type)
    #[arg(long)]
    pcap: PathBuf,
    /// Output record CSV
    #[arg(long)]
    out: PathBuf,
    /// IEC 104 TCP port
    #[arg(long)]
    port: Option<u16>,
    /// Keep only I-frames (drop S/U supervision traffic)
    #[arg(long)]
    i_frames_only: bool,
    /// Optional key=value config file; flags override it
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    /// Output record CSV
    #[arg(long)]
    out: PathBuf,
    /// Number of packets
    #[arg(long)]
    count: Option<usize>,
    /// Mean gap between packets, seconds
    #[arg(long)]
    period: Option<f64>,
    /// Uniform jitter as a fraction of the period, in [0, 1)
    #[arg(long)]
    jitter: Option<f64>,
    /// RNG seed
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct InjectArgs {
    /// Input record CSV
    #[arg(long, value_name = "CSV")]
    input: PathBuf,
    /// Scenario file: key=value lines or a JSON object
    #[arg(long)]
    scenario: PathBuf,
    /// Output labeled record CSV
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Input record CSV (assumed attack-free)
    #[arg(long, value_name = "CSV")]
    input: PathBuf,
    /// Where to write the model file
    #[arg(long)]
    model_out: PathBuf,
    #[command(flatten)]
    tuning: TuningArgs,
    #[command(flatten)]
    selector: SelectorArgs,
}

#[derive(Args)]
struct DetectArgs {
    /// Input record CSV
    #[arg(long, value_name = "CSV")]
    input: PathBuf,
    /// Score against a saved model instead of fitting in-stream
    #[arg(long)]
    model: Option<PathBuf>,
    /// batch (fit each window on itself) or train-score (learn on the
    /// leading fraction, score the rest)
    #[arg(long)]
    mode: Option<String>,
    /// Plot-ready CSV: sample_index,iat_seconds,score,verdict
    #[arg(long)]
    plot_out: Option<PathBuf>,
    /// Full detection report as JSON
    #[arg(long)]
    report_out: Option<PathBuf>,
    /// Feature series as two-column CSV (index,iat_seconds)
    #[arg(long)]
    series_out: Option<PathBuf>,
    /// Exit with code 1 if any outlier is found
    #[arg(long)]
    fail_on_outlier: bool,
    #[command(flatten)]
    tuning: TuningArgs,
    #[command(flatten)]
    selector: SelectorArgs,
}

#[derive(Args)]
struct ValidateArgs {
    /// Input record CSV; a label column enables detection-rate reporting
    #[arg(long, value_name = "CSV")]
    input: PathBuf,
    /// Validation summary as JSON
    #[arg(long)]
    json: Option<PathBuf>,
    #[command(flatten)]
    tuning: TuningArgs,
    #[command(flatten)]
    selector: SelectorArgs,
}

#[derive(Args)]
struct BenchArgs {
    /// Input record CSV
    #[arg(long, value_name = "CSV")]
    input: PathBuf,
    #[command(flatten)]
    tuning: TuningArgs,
    #[command(flatten)]
    selector: SelectorArgs,
}

/// Detection tuning shared by train/detect/validate/bench.
#[derive(Args)]
struct TuningArgs {
    /// Neighborhood size for LOF
    #[arg(long)]
    k: Option<usize>,
    /// Samples per tumbling window
    #[arg(long)]
    window_size: Option<usize>,
    /// Fixed decision threshold on the LOF score (> 1)
    #[arg(long, conflicts_with = "auto_threshold")]
    threshold: Option<f64>,
    /// Learn the threshold from training scores; takes an optional
    /// percentile (default 99.9)
    #[arg(
        long,
        value_name = "PERCENTILE",
        num_args = 0..=1,
        default_missing_value = "99.9"
    )]
    auto_threshold: Option<f64>,
    /// Leading fraction used for training
    #[arg(long)]
    train_fraction: Option<f64>,
    #[arg(long)]
    config: Option<PathBuf>,
}

/// Which conversation's series to analyze.
#[derive(Args)]
struct SelectorArgs {
    /// Merge all traffic into one series regardless of conversation
    #[arg(long, conflicts_with = "conversation")]
    merge_all: bool,
    /// Analyze one conversation, written as addr:port-addr:port
    #[arg(long)]
    conversation: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Extract(args) => commands::extract(args),
        Command::Generate(args) => commands::generate(args),
        Command::Inject(args) => commands::inject(args),
        Command::Train(args) => commands::train(args),
        Command::Detect(args) => commands::detect(args),
        Command::Validate(args) => commands::validate(args),
        Command::Bench(args) => commands::bench(args),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
    }
}
