//! `segprop`: keyframe label propagation from the command line.
//!
//! Logs go to stderr; reports are JSON files under `--out`. Exit codes:
//! 0 success, 1 other failure, 2 invalid input, 3 missing optical flow.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use config::ConfigArgs;

#[derive(Parser, Debug)]
#[command(name = "segprop", version, about = "Propagate sparse keyframe labels through video")]
struct Cli {
    /// Worker threads for data-parallel stages (default: available cores).
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
    /// More log output; repeat for trace level.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Label every frame of a sequence from its keyframes.
    Propagate(PropagateArgs),
    /// Score predicted label images against ground truth.
    Evaluate(EvaluateArgs),
    /// Hide keyframes at several strides and score the propagated frames.
    Ablate(AblateArgs),
    /// Render a synthetic sequence with exact flow and dense labels.
    Synth(SynthArgs),
    /// Run the annotation HTTP service.
    Serve(ServeArgs),
}

#[derive(Args, Debug)]
struct FlowArgs {
    /// Flow directory (default: the manifest's, else `flow/` next to it).
    #[arg(long, value_name = "DIR", conflicts_with = "estimate_flow")]
    flow: Option<PathBuf>,
    /// Estimate flow from the frames with pyramidal Lucas-Kanade.
    #[arg(long)]
    estimate_flow: bool,
}

#[derive(Args, Debug)]
struct PropagateArgs {
    #[arg(long, value_name = "FILE")]
    manifest: PathBuf,
    #[command(flatten)]
    flow: FlowArgs,
    #[command(flatten)]
    config: ConfigArgs,
    /// Extra vote source, `external:DIR` or `external:DIR@WEIGHT`. Repeatable.
    #[arg(long = "provider", value_name = "SPEC")]
    providers: Vec<String>,
    /// Palette color tolerance when decoding label images.
    #[arg(long, default_value_t = segprop_core::dataset::DEFAULT_COLOR_TOLERANCE)]
    tau_color: u8,
    /// Check inputs, flow and config without writing anything.
    #[arg(long)]
    dry_run: bool,
    #[arg(long, value_name = "DIR", required_unless_present = "dry_run")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// Directory of predicted `NNNNNN.png` label images.
    #[arg(long, value_name = "DIR")]
    pred: PathBuf,
    /// Directory of ground-truth label images; every one must be predicted.
    #[arg(long, value_name = "DIR")]
    gt: PathBuf,
    #[arg(long, default_value_t = segprop_core::dataset::DEFAULT_COLOR_TOLERANCE)]
    tau_color: u8,
    /// Write the JSON report here.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AblateArgs {
    #[arg(long, value_name = "FILE")]
    manifest: PathBuf,
    /// Comma-separated keyframe strides.
    #[arg(long, value_delimiter = ',', default_value = "25,50,100")]
    strides: Vec<usize>,
    /// Dense ground truth for every frame; without it only hidden keyframes
    /// are scored.
    #[arg(long, value_name = "DIR")]
    gt: Option<PathBuf>,
    #[command(flatten)]
    flow: FlowArgs,
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long, default_value_t = segprop_core::dataset::DEFAULT_COLOR_TOLERANCE)]
    tau_color: u8,
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Preset {
    /// Drifting rectangles over a static background.
    Translating,
    /// The same rectangles, standing still.
    Static,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Scene description in JSON; overrides the preset.
    #[arg(long, value_name = "FILE")]
    spec: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "translating")]
    preset: Preset,
    #[arg(long, default_value_t = 256)]
    width: usize,
    #[arg(long, default_value_t = 256)]
    height: usize,
    #[arg(long, default_value_t = 101)]
    frames: usize,
    #[arg(long, default_value_t = 3)]
    sprites: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Keyframe labels every this many frames; the last frame is always one.
    #[arg(long, default_value_t = 25)]
    label_stride: usize,
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ServeArgs {
    /// Directory whose subdirectories are sequences.
    #[arg(long, value_name = "DIR")]
    root: PathBuf,
    #[arg(long, default_value = "127.0.0.1")]
    host: std::net::IpAddr,
    #[arg(long, default_value_t = 8080)]
    port: u16,
    /// Propagation worker threads.
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "info",
        1 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    let result = cli
        .jobs
        .map_or(Ok(()), |n| segprop_core::par::set_thread_count(n).map_err(Into::into))
        .and_then(|()| match cli.command {
            Command::Propagate(a) => commands::propagate(a),
            Command::Evaluate(a) => commands::evaluate(a),
            Command::Ablate(a) => commands::ablate(a),
            Command::Synth(a) => commands::synth(a),
            Command::Serve(a) => commands::serve(a),
        });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.code)
        }
    }
}
