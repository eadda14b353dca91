use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

mod commands;
mod output;

#[derive(Debug, Parser, Serialize)]
#[command(name = "learncut", version, about = "Gomory cutting planes with learned cut selection")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Serialize)]
struct GlobalArgs {
    /// Worker threads; 1 runs everything sequentially.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Experiment directory (created if missing).
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "lowercase")]
enum Command {
    /// Generate labeled instances and a train/test manifest.
    Generate(GenerateArgs),
    /// Train a policy with evolution strategies.
    Train(TrainArgs),
    /// Run cutting-plane rollouts with one selector.
    Eval(EvalArgs),
    /// Branch-and-cut with a cut selector.
    Bnc(BncArgs),
    /// Score cuts against the cover-inequality criteria.
    Interpret(InterpretArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum FamilyName {
    Packing,
    BinaryPacking,
    Planning,
    Maxcut,
    Knapsack,
}

#[derive(Debug, Clone, Args, Serialize)]
struct FamilyArgs {
    #[arg(long, value_enum, default_value_t = FamilyName::Packing)]
    family: FamilyName,
    #[arg(long, default_value_t = 10)]
    n: usize,
    #[arg(long, default_value_t = 5)]
    m: usize,
    /// Planning horizon K.
    #[arg(long, default_value_t = 10)]
    horizon_periods: usize,
    #[arg(long, default_value_t = 7)]
    vertices: usize,
    #[arg(long, default_value_t = 20)]
    edges: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum SplitName {
    Train,
    Test,
}

/// Where instances come from: a manifest, or fresh generation.
#[derive(Debug, Clone, Args, Serialize)]
struct SourceArgs {
    /// Dataset manifest written by `generate`.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Split to read from the manifest, or seed stream when generating.
    #[arg(long, value_enum)]
    split: Option<SplitName>,
    #[command(flatten)]
    family: FamilyArgs,
    /// Instances to generate when no manifest is given.
    #[arg(long)]
    count: Option<usize>,
    /// Branch-and-bound node limit for labeling optima.
    #[arg(long, default_value_t = 200_000)]
    label_nodes: usize,
}

#[derive(Debug, Args, Serialize)]
struct GenerateArgs {
    #[command(flatten)]
    family: FamilyArgs,
    #[arg(long, default_value_t = 50)]
    count: usize,
    /// Instances in the train split; defaults to 60% of `count`.
    #[arg(long)]
    train: Option<usize>,
    #[arg(long, default_value_t = 200_000)]
    label_nodes: usize,
    /// Skip computing known optima.
    #[arg(long)]
    no_label: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum ArchName {
    Attention,
    Lstm,
}

#[derive(Debug, Args, Serialize)]
struct TrainArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long, value_enum, default_value_t = ArchName::Attention)]
    arch: ArchName,
    #[arg(long, default_value_t = 10)]
    lstm_hidden: usize,
    #[arg(long, default_value_t = 64)]
    hidden_units: usize,
    #[arg(long, default_value_t = 64)]
    embed_dim: usize,
    /// Perturbations per iteration (N).
    #[arg(long)]
    perturbations: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    trajectories: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
    /// Cut horizon T.
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Initial weights to continue from.
    #[arg(long)]
    init: Option<PathBuf>,
    /// Output weights path; defaults to `<out>/policy.json`.
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Save weights every k iterations under `<out>/checkpoints`.
    #[arg(long)]
    checkpoint_every: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum ModeName {
    Train,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum DecodeName {
    Greedy,
    Sample,
}

#[derive(Debug, Args, Serialize)]
struct EvalArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// random, mv, mnv, le, or a weights file.
    #[arg(long, default_value = "random")]
    selector: String,
    #[arg(long, value_enum, default_value_t = DecodeName::Greedy)]
    decode: DecodeName,
    #[arg(long, default_value_t = 50)]
    horizon: usize,
    #[arg(long, default_value_t = 0.99)]
    gamma: f64,
    /// Stopping window H.
    #[arg(long, default_value_t = 5)]
    window: usize,
    /// Stopping threshold eta.
    #[arg(long, default_value_t = 0.001)]
    threshold: f64,
    #[arg(long, value_enum, default_value_t = ModeName::Test)]
    mode: ModeName,
}

#[derive(Debug, Args, Serialize)]
struct BncArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// random, mv, mnv, le, none, or a weights file.
    #[arg(long, default_value = "none")]
    selector: String,
    #[arg(long, default_value_t = 10)]
    ncuts: usize,
    /// Node budget; 0 means unlimited.
    #[arg(long, default_value_t = 200)]
    budget: usize,
    #[arg(long)]
    igc_target: Option<f64>,
    /// Stop when the bound gap ratio falls below this.
    #[arg(long, default_value_t = 1e-4)]
    gap_threshold: f64,
}

#[derive(Debug, Args, Serialize)]
struct InterpretArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Comma-separated selectors (heuristic names or weights files).
    #[arg(long, default_value = "random,mv,mnv,le", value_delimiter = ',')]
    selectors: Vec<String>,
    #[arg(long, default_value_t = 1000)]
    horizon: usize,
    #[arg(long, value_enum, default_value_t = ModeName::Test)]
    mode: ModeName,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
