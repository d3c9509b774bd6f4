//! `arms`: command-line driver for the true-flow engines.
//!
//! Exit codes: 0 on success, 2 for configuration errors (including bad
//! command-line usage), 3 for data and I/O errors.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "arms",
    version,
    about = "Event-camera true optical flow: ARMS, fARMS and a hARMS accelerator model"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Configuration shared by every command that runs the pipeline. The file is
/// read first, then the shorthand flags, then `--set` overrides in order.
#[derive(Debug, Clone, Default, Args)]
struct ConfigArgs {
    /// key=value configuration file (`farms.n=1000`, `run.engine=harms`, ...)
    #[arg(short, long, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Override one configuration key; repeatable
    #[arg(short = 's', long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Input: raw events, local flow (with run.local_flow=precomputed), a
    /// .manifest file or `synthetic:bar-square`
    #[arg(short, long)]
    input: Option<String>,

    /// Pooling engine: arms, farms or harms
    #[arg(short, long)]
    engine: Option<String>,

    /// Seed for the synthetic input
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic Bar-Square recording and its manifest
    Generate(GenerateArgs),
    /// Convert raw events to local-flow events
    Localflow {
        #[command(flatten)]
        config: ConfigArgs,
        /// Local-flow output file
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Run one engine over the input and write the true-flow file
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        /// True-flow output file
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Time engines over a parameter grid and print CSV
    Bench {
        #[command(flatten)]
        config: ConfigArgs,
        /// Grid axis `key=v1,v2,...` over engine, w_max, eta, n or p; repeatable
        #[arg(long = "sweep", value_name = "KEY=VALUES")]
        sweeps: Vec<String>,
        /// Runs per grid point; the fastest is reported
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        /// CSV output file instead of stdout
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Compare two engines on the same input, or two true-flow files
    Compare {
        #[command(flatten)]
        config: ConfigArgs,
        /// Engines to compare
        #[arg(long, num_args = 2, value_names = ["A", "B"], conflicts_with = "files")]
        engines: Option<Vec<String>>,
        /// True-flow files to compare
        #[arg(long, num_args = 2, value_names = ["A", "B"])]
        files: Option<Vec<PathBuf>>,
    },
    /// Direction statistics and ground-truth checks for a true-flow file
    Metrics(MetricsArgs),
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// Event file to write
    #[arg(short, long)]
    output: PathBuf,
    /// Manifest path; defaults to the event path with a .manifest extension
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long, default_value_t = arms_core::synth::DEFAULT_SEED)]
    seed: u64,
    /// Single-segment scene speed in px/s; without any of speed, direction
    /// or duration the two-segment benchmark scene is written
    #[arg(long)]
    speed: Option<f64>,
    /// Single-segment motion direction in degrees
    #[arg(long)]
    direction: Option<f64>,
    /// Single-segment duration in microseconds
    #[arg(long)]
    duration_us: Option<i64>,
    /// Events per pixel crossing
    #[arg(long)]
    rate: Option<u32>,
    /// Gaussian timestamp noise in microseconds
    #[arg(long)]
    noise_us: Option<f64>,
    #[arg(long, default_value_t = 304)]
    width: u16,
    #[arg(long, default_value_t = 240)]
    height: u16,
}

#[derive(Debug, Args)]
struct MetricsArgs {
    /// True-flow file
    #[arg(short, long)]
    flow: PathBuf,
    /// Histogram bin width in degrees
    #[arg(long, default_value_t = arms_core::metrics::DEFAULT_BIN_WIDTH_DEG)]
    bin_width: f64,
    /// Write the direction histogram as CSV
    #[arg(long)]
    histogram: Option<PathBuf>,
    /// Manifest with ground truth and recording duration
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Engine rate in events per second for a real-time verdict
    #[arg(long)]
    engine_rate: Option<f64>,
    /// Resampling step for velocity correlation, microseconds
    #[arg(long, default_value_t = arms_core::metrics::DEFAULT_RESAMPLE_US)]
    resample_us: i64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::dispatch(cli.command) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 3 })
        }
    }
}
