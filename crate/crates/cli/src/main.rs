#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod run_dir;

#[derive(Parser)]
#[command(
    name = "shaping",
    version,
    about = "Learned constellation shaping: train, evaluate, compare"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a shaping system from a JSON run config.
    Train(TrainArgs),
    /// Evaluate a trained checkpoint over an SNR grid.
    Eval(EvalArgs),
    /// Write a reference MI curve.
    Baseline(BaselineArgs),
    /// Merge MI curves onto one grid and write gaps to the first curve.
    Compare(CompareArgs),
    /// Export a constellation as `re,im,prob`.
    ExportConstellation(ExportArgs),
    /// Run the fast invariant suite.
    Check(CheckArgs),
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Config override `key=value`; dotted keys reach nested fields.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Minimize the plain cross-entropy instead (negative control).
    #[arg(long)]
    uncorrected: bool,
}

#[derive(Args)]
struct ModelArgs {
    /// Output directory of a `train` run (reads its config and checkpoint).
    #[arg(long, conflicts_with_all = ["config", "checkpoint"])]
    run: Option<PathBuf>,
    #[arg(long, requires = "checkpoint")]
    config: Option<PathBuf>,
    #[arg(long, requires = "config")]
    checkpoint: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    out: PathBuf,
    /// `lo:hi:step` in dB, or a comma-separated list.
    #[arg(long, default_value = "-2:40:1")]
    snr_grid: String,
    /// Channel to evaluate on (defaults to the training channel).
    #[arg(long)]
    channel: Option<String>,
    #[arg(long, default_value_t = 1_000_000)]
    mc_samples: usize,
    /// Samples for the demodulator bound; 0 skips it.
    #[arg(long, default_value_t = 100_000)]
    bound_samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Scheme name used for the curve file (defaults to `{mode}{order}`).
    #[arg(long)]
    scheme: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scheme {
    Qam,
    MbQam,
    Capacity,
    RayleighBound,
}

#[derive(Args)]
struct BaselineArgs {
    #[arg(long, value_enum)]
    scheme: Scheme,
    #[arg(long, default_value_t = 16)]
    order: usize,
    #[arg(long, default_value = "-2:40:1")]
    snr_grid: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "awgn")]
    channel: String,
    #[arg(long, default_value_t = 1_000_000)]
    mc_samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct CompareArgs {
    /// MI curve CSVs (`snr,mi`); the first one is the reference.
    #[arg(required = true, num_args = 1..)]
    curves: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExportArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Export a fixed constellation instead of a trained one.
    #[arg(long, value_enum, conflicts_with_all = ["run", "config"])]
    baseline: Option<Scheme>,
    #[arg(long, default_value_t = 16)]
    order: usize,
    #[arg(long)]
    snr: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Fault {
    BackwardSign,
    NoiseVariance,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, hide = true)]
    inject_fault: Option<Fault>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match commands::dispatch(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            if commands::is_config_error(&err) {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
