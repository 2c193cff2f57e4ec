//! `duet`: feature extraction, corpus synthesis, training, generation and
//! evaluation from the command line.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Bad arguments or configuration; exits with status 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser, Debug)]
#[command(
    name = "duet",
    version,
    about = "Listener, talker and conversational head-motion generation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Extract 45-dim acoustic features from a WAV file into a VCAF file.
    ExtractFeatures(ExtractArgs),
    /// Write a seeded synthetic conversation corpus.
    SynthData(SynthArgs),
    /// Train a listener, talker or conversational agent.
    Train(TrainArgs),
    /// Generate an agent's motion for every turn of a conversation.
    Generate(GenerateArgs),
    /// Score a method against ground truth with the FD metrics.
    Evaluate(EvaluateArgs),
}

#[derive(Args, Debug)]
struct ExtractArgs {
    #[arg(long)]
    audio: PathBuf,
    #[arg(long, default_value_t = 30.0)]
    fps: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct Overrides {
    /// JSON config file; its keys override the defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one config key, e.g. `--set train.epochs=5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Seed; overrides the config and the DUET_SEED environment variable.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[command(flatten)]
    overrides: Overrides,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TaskArg {
    Listener,
    Talker,
    Agent,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long, value_enum)]
    task: TaskArg,
    #[command(flatten)]
    overrides: Overrides,
    /// Corpus root. Uses `train/` and `val/` below it when present,
    /// otherwise every manifest below it is training data.
    #[arg(long)]
    data: PathBuf,
    /// Output directory for checkpoints, metrics and the resolved config.
    #[arg(long)]
    out: PathBuf,
    /// Listener checkpoint to start agent training from.
    #[arg(long)]
    listener: Option<PathBuf>,
    /// Talker checkpoint to start agent training from.
    #[arg(long)]
    talker: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum AgentArg {
    P,
    Q,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PolicyArg {
    /// Carry the state through the role switcher.
    Carry,
    /// Re-initialize the state at every turn.
    Reset,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, value_enum, ignore_case = true)]
    agent: AgentArg,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, value_enum, default_value = "carry")]
    policy: PolicyArg,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TargetArg {
    Listener,
    Talker,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// Directory searched recursively for manifest.json files.
    #[arg(long)]
    manifests: PathBuf,
    /// `mirror`, `random`, `ground-truth` or `ckpt:<path>`.
    #[arg(long)]
    method: String,
    #[arg(long, value_enum, default_value = "listener")]
    target: TargetArg,
    /// Standard deviation of the random baseline.
    #[arg(long, default_value_t = duet_core::eval::DEFAULT_SIGMA)]
    sigma: f64,
    /// Seed of the random baseline; defaults to DUET_SEED or 0.
    #[arg(long)]
    seed: Option<u64>,
    /// Dataset name recorded in the report; defaults to the directory name.
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::ExtractFeatures(a) => commands::extract(a),
        Command::SynthData(a) => commands::synth_data(a),
        Command::Train(a) => commands::train(a),
        Command::Generate(a) => commands::generate(a),
        Command::Evaluate(a) => commands::evaluate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<UsageError>() => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
