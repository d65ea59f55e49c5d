//! `dispute` command-line front-end.
//!
//! Exit codes: 0 on success, 1 on a domain error, 2 on a usage error.

mod commands;

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(name = "dispute", version, about = "Train dispute classifiers, rank inputs and search for peaceful changes")]
struct Cli {
    /// Worker threads for data-parallel work; 0 uses one per core.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Log progress to standard error.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate a dyad-year CSV, rewrite it canonically and optionally split it.
    Ingest(IngestArgs),
    /// Generate a synthetic dataset with known ground truth.
    Synth(SynthArgs),
    /// Train a model with the evidence framework, HMC or ARD.
    Train(TrainArgs),
    /// Score a model on a dataset: AUC, confusion matrix, ROC points.
    Evaluate(EvaluateArgs),
    /// Rank input relevance from an ARD model, training one if needed.
    Ard(ArdArgs),
    /// Evaluate the 16 corner scenarios of the input space.
    Sweep(SweepArgs),
    /// Propose changes to controllable variables for one case.
    Control(ControlArgs),
    /// Run a control strategy over every case of a dataset.
    Campaign(CampaignArgs),
    /// Start the HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
struct IngestArgs {
    /// Input CSV.
    #[arg(long)]
    data: PathBuf,
    /// Canonical copy of the validated dataset.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Records per class in the balanced training split.
    #[arg(long, requires_all = ["seed", "train_out", "test_out"])]
    per_class: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Balanced training split.
    #[arg(long, requires = "per_class")]
    train_out: Option<PathBuf>,
    /// Remaining records.
    #[arg(long, requires = "per_class")]
    test_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SynthKind {
    /// Strong signal on the controllable variables.
    Separable,
    /// Signal on `--informative` variables only.
    Informative,
    /// Labels independent of the inputs.
    Noise,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    count: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = SynthKind::Separable)]
    kind: SynthKind,
    /// Informative variables, comma separated.
    #[arg(long, value_delimiter = ',', required_if_eq("kind", "informative"))]
    informative: Vec<String>,
    /// Peace strength of each informative variable.
    #[arg(long, default_value_t = 8.0)]
    strength: f64,
    /// Generator configuration and seed as JSON.
    #[arg(long)]
    provenance: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Evidence,
    Hmc,
    Ard,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long, value_enum)]
    method: MethodArg,
    /// Training CSV.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    seed: u64,
    /// Model artifact JSON.
    #[arg(long)]
    out: PathBuf,
    /// Recipe overrides as JSON; omitted fields keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Hidden units.
    #[arg(long)]
    hidden: Option<usize>,
    /// Choose the architecture by genetic search.
    #[arg(long)]
    ga: bool,
    /// GA history CSV.
    #[arg(long, requires = "ga")]
    ga_history: Option<PathBuf>,
    /// Independent HMC chains.
    #[arg(long)]
    chains: Option<usize>,
    /// Retained HMC samples per chain.
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    model: PathBuf,
    /// Test CSV.
    #[arg(long)]
    data: PathBuf,
    /// ROC points CSV.
    #[arg(long)]
    roc: Option<PathBuf>,
    /// Thresholds kept on the ROC curve.
    #[arg(long, default_value_t = 200)]
    n_thresholds: usize,
    /// Decision threshold for the confusion matrix.
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    /// Metrics JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Omission study CSV; retrains on `--train` once per left-out variable
    /// with the model's recipe.
    #[arg(long, requires_all = ["train", "seed"])]
    omission: Option<PathBuf>,
    /// Training CSV for the omission study.
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["model", "data"]))]
struct ArdArgs {
    /// Existing ARD model.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Training CSV for a new ARD model.
    #[arg(long, requires = "seed")]
    data: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, requires = "data")]
    hidden: Option<usize>,
    /// Relevance CSV `variable,alpha,relevance`, most relevant first.
    #[arg(long)]
    out: PathBuf,
    /// Where to save a newly trained ARD model.
    #[arg(long, requires = "data")]
    model_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    model: PathBuf,
    /// Scenario CSV.
    #[arg(long)]
    out: PathBuf,
    /// Scenario rows with raw values as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ControlArgs {
    #[arg(long)]
    model: PathBuf,
    /// JSON object of raw values keyed by variable name.
    #[arg(long)]
    case: PathBuf,
    /// `multi` or one controllable variable.
    #[arg(long, value_parser = commands::parse_strategy)]
    strategy: dispute_core::control::Strategy,
    #[arg(long)]
    seed: u64,
    /// Control settings as JSON; omitted fields keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Result JSON.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct CampaignArgs {
    #[arg(long)]
    model: PathBuf,
    /// Test CSV.
    #[arg(long)]
    data: PathBuf,
    /// `multi`, one controllable variable, or `all` for every strategy.
    #[arg(long, value_parser = commands::parse_strategies)]
    strategy: commands::Strategies,
    #[arg(long)]
    seed: u64,
    /// Control settings as JSON; omitted fields keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Full report JSON; an array when several strategies run.
    #[arg(long)]
    out: PathBuf,
    /// Per-case CSV; one file per strategy gets the strategy name inserted
    /// before the extension when several run.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Averted fractions per strategy as JSON.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, env = "DISPUTE_LISTEN", default_value = "127.0.0.1:8080")]
    listen: std::net::SocketAddr,
    /// Directory holding datasets, models and job records.
    #[arg(long, env = "DISPUTE_ARTIFACTS")]
    artifacts: PathBuf,
    /// Training and campaign jobs run at once.
    #[arg(long, env = "DISPUTE_WORKERS", default_value_t = 1)]
    workers: usize,
    /// Static UI assets served at `/`.
    #[arg(long, env = "DISPUTE_STATIC")]
    static_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(level)),
        )
        .init();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
