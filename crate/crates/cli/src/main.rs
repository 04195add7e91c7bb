//! `gravity` command-line front end.
//!
//! Every command writes its artifacts and a `manifest.json` into `--out`.
//! Exit status: 0 on success, 2 for bad inputs or configuration, 3 when
//! training produced non-finite values.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use gravity::train::CONFIG_KEYS;

#[derive(Parser)]
#[command(name = "gravity", version, about = "Force-gated graph embedding and classification")]
struct Cli {
    /// Worker threads for parallel sections; defaults to all cores.
    #[arg(long, env = "GRAVITY_THREADS", global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

/// Graph input: a directory with `edges.tsv`, `features.csv` and optionally
/// `labels.csv`, or the three files named individually.
#[derive(Args, Clone, Debug, Serialize)]
pub struct GraphArgs {
    #[arg(long, conflicts_with_all = ["edges", "features", "labels"])]
    pub graph: Option<PathBuf>,
    /// Edge list, `src<TAB>dst<TAB>weight` per line.
    #[arg(long, requires = "features")]
    pub edges: Option<PathBuf>,
    /// Feature CSV, one row per vertex.
    #[arg(long, requires = "edges")]
    pub features: Option<PathBuf>,
    /// Label CSV with a `K=<int>` first line.
    #[arg(long)]
    pub labels: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Exact social ties of every ordered pair.
    TieOracle(TieOracleArgs),
    /// Fit the tie approximator and score it in-domain and on other graphs.
    TieFit(TieFitArgs),
    /// Score a fitted tie approximator on other graphs.
    TieEval(TieEvalArgs),
    /// Train encoder and discriminator.
    #[command(after_help = config_help())]
    Fit(FitArgs),
    /// Classify the vertices of a graph with a trained model.
    Predict(PredictArgs),
    /// Dump embedding, ties, latent force kernel and group force.
    Inspect(InspectArgs),
    /// Draw a stochastic block model graph.
    GenSbm(GenSbmArgs),
}

#[derive(Args, Debug, Serialize)]
pub struct TieOracleArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(long, default_value_t = 3)]
    pub hops: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct TieFitArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    /// Graph directory to score zero-shot; repeatable.
    #[arg(long)]
    pub eval: Vec<PathBuf>,
    #[arg(long, default_value_t = 3)]
    pub hops: usize,
    #[arg(long, default_value_t = 3000)]
    pub epochs: usize,
    #[arg(long, default_value_t = 128)]
    pub hidden: usize,
    #[arg(long, default_value_t = 0.003)]
    pub lr: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct TieEvalArgs {
    /// `tie_model.json` written by `tie-fit`.
    #[arg(long)]
    pub model: PathBuf,
    /// Graph directory to score; repeatable.
    #[arg(long, required = true)]
    pub eval: Vec<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct FitArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    /// `key = value` config file; see the key list below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides one config key, `key=value`; repeatable.
    #[arg(long = "set")]
    pub overrides: Vec<String>,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write the embedding every N epochs to `snapshots/`.
    #[arg(long)]
    pub snapshot_every: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct PredictArgs {
    /// `model.grva` written by `fit`.
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct InspectArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct GenSbmArgs {
    #[arg(long, default_value_t = 4)]
    pub blocks: usize,
    #[arg(long, default_value_t = 20)]
    pub per_block: usize,
    #[arg(long, default_value_t = 0.3)]
    pub p_in: f64,
    #[arg(long, default_value_t = 0.02)]
    pub p_out: f64,
    #[arg(long, default_value_t = 16)]
    pub feature_dim: usize,
    #[arg(long, default_value_t = 2.0)]
    pub feature_shift: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

fn config_help() -> String {
    let mut s = String::from("Config keys:\n");
    for (k, what) in CONFIG_KEYS {
        s.push_str(&format!("  {k:<26} {what}\n"));
    }
    s
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::TieOracle(a) => commands::tie_oracle(a),
        Command::TieFit(a) => commands::tie_fit(a),
        Command::TieEval(a) => commands::tie_eval(a),
        Command::Fit(a) => commands::fit(a),
        Command::Predict(a) => commands::predict(a),
        Command::Inspect(a) => commands::inspect(a),
        Command::GenSbm(a) => commands::gen_sbm(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 3 })
        }
    }
}
