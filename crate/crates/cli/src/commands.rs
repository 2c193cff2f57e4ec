use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use duet_core::audio::{extract_features, read_wav};
use duet_core::coeffs::{load_conversations, save_sequence, Conversation, Role};
use duet_core::eval::{evaluate_run, EvalTarget, Method};
use duet_core::nn::{Checkpoint, ModelConfig, ModelParams};
use duet_core::synth::{synth_corpus, SynthConfig};
use duet_core::tasks::{agent_turns, generate_conversation_with, Agent, SwitchPolicy};
use duet_core::train::{agent_init, task_examples, train_task_with, write_metrics_jsonl, Task, TrainingConfig};

use crate::config::{env_seed, log_resolved, resolve};
use crate::{
    AgentArg, EvaluateArgs, ExtractArgs, GenerateArgs, PolicyArg, SynthArgs, TargetArg, TaskArg, TrainArgs, UsageError,
};

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Turns a failed config check into a usage error.
fn checked(result: duet_core::Result<()>) -> Result<()> {
    result.map_err(|e| usage(e.to_string()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

pub fn extract(args: ExtractArgs) -> Result<()> {
    if !(args.fps > 0.0 && args.fps.is_finite()) {
        return Err(usage(format!("--fps must be positive, got {}", args.fps)));
    }
    let clip = read_wav(&args.audio).with_context(|| format!("audio: reading {}", args.audio.display()))?;
    let features = extract_features(&clip, args.fps).context("audio: extracting features")?;
    features
        .save(&args.out)
        .with_context(|| format!("audio: writing {}", args.out.display()))?;
    eprintln!(
        "extract-features: {} frames at {} fps from {} samples at {} Hz",
        features.len(),
        args.fps,
        clip.samples.len(),
        clip.sample_rate
    );
    Ok(())
}

pub fn synth_data(args: SynthArgs) -> Result<()> {
    let mut defaults = SynthConfig::default();
    if let Some(seed) = env_seed()? {
        defaults.seed = seed;
    }
    let mut config = resolve(&defaults, args.overrides.config.as_deref(), &args.overrides.set)?;
    if let Some(seed) = args.overrides.seed {
        config.seed = seed;
    }
    checked(config.check())?;
    log_resolved("synth-data", &config);
    let stats = synth_corpus(&config, &args.out).with_context(|| format!("synth: writing {}", args.out.display()))?;
    eprintln!(
        "synth-data: {} conversations, {} turns, {} frames in {}",
        stats.conversations,
        stats.turns,
        stats.frames,
        args.out.display()
    );
    Ok(())
}

/// The `train` config file: `{"model": {...}, "train": {...}}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainFile {
    model: ModelConfig,
    train: TrainingConfig,
}

fn load_checkpoint(path: &Path, what: &str) -> Result<ModelParams> {
    Ok(Checkpoint::load(path)
        .with_context(|| format!("nn: loading {what} checkpoint {}", path.display()))?
        .params)
}

/// `dir/train` and `dir/val` when `dir/train` exists, otherwise every
/// conversation below `dir` with no validation set.
fn load_splits(dir: &Path) -> Result<(Vec<Conversation>, Vec<Conversation>)> {
    let load =
        |d: &Path| load_conversations(d).with_context(|| format!("coeffs: loading conversations from {}", d.display()));
    let train_dir = dir.join("train");
    if train_dir.is_dir() {
        let val_dir = dir.join("val");
        let val = if val_dir.is_dir() { load(&val_dir)? } else { Vec::new() };
        Ok((load(&train_dir)?, val))
    } else {
        Ok((load(dir)?, Vec::new()))
    }
}

pub fn train(args: TrainArgs) -> Result<()> {
    let task = match args.task {
        TaskArg::Listener => Task::Listener,
        TaskArg::Talker => Task::Talker,
        TaskArg::Agent => Task::Agent,
    };
    let init_branches = match (task, &args.listener, &args.talker) {
        (Task::Agent, Some(l), Some(t)) => Some((load_checkpoint(l, "listener")?, load_checkpoint(t, "talker")?)),
        (Task::Agent, _, _) => return Err(usage("--task agent needs both --listener and --talker checkpoints")),
        (_, None, None) => None,
        _ => return Err(usage("--listener and --talker are only used with --task agent")),
    };

    let mut defaults = TrainFile {
        model: ModelConfig::default(),
        train: TrainingConfig::for_task(task),
    };
    if let Some((listener, _)) = &init_branches {
        defaults.model = listener.config.clone();
    }
    if let Some(seed) = env_seed()? {
        defaults.model.seed = seed;
        defaults.train.seed = seed;
    }
    let mut config = resolve(&defaults, args.overrides.config.as_deref(), &args.overrides.set)?;
    if let Some(seed) = args.overrides.seed {
        config.model.seed = seed;
        config.train.seed = seed;
    }
    if config.train.task != task {
        return Err(usage(format!(
            "config sets train.task to {:?} but --task is {:?}",
            config.train.task, task
        )));
    }
    checked(config.model.check())?;
    checked(config.train.check())?;
    log_resolved("train", &config);

    let init = match init_branches {
        Some((listener, talker)) => {
            let mut expected = listener.config.clone();
            expected.seed = config.model.seed;
            if config.model != expected {
                return Err(usage(
                    "agent training takes its model config from the listener checkpoint",
                ));
            }
            agent_init(&listener, &talker).context("train: combining listener and talker checkpoints")?
        }
        None => ModelParams::new(config.model.clone()).context("nn: building the model")?,
    };

    let (train_convs, val_convs) = load_splits(&args.data)?;
    let examples =
        |convs: &[Conversation]| task_examples(task, convs, &init.config).context("train: building examples");
    let train_set = examples(&train_convs)?;
    let val_set = examples(&val_convs)?;
    if train_set.is_empty() {
        return Err(usage(format!("no training examples under {}", args.data.display())));
    }
    eprintln!(
        "train: {} training and {} validation examples",
        train_set.len(),
        val_set.len()
    );

    create_dir(&args.out)?;
    let mut report = |r: &duet_core::train::MetricsRecord| {
        eprintln!("  epoch {} {} loss {:.6} lr {:.3e}", r.epoch, r.split, r.l_total, r.lr);
    };
    let outcome = train_task_with(&config.train, init, &train_set, &val_set, &mut report).context("train")?;

    let save = |params: &ModelParams, name: &str, epoch: usize| -> Result<()> {
        let mut ck = Checkpoint::new(params.clone());
        ck.metadata.insert("task".into(), serde_json::to_value(task)?);
        ck.metadata.insert("epoch".into(), epoch.into());
        ck.metadata
            .insert("best_loss".into(), serde_json::json!(outcome.best_loss));
        let path = args.out.join(name);
        ck.save(&path)
            .with_context(|| format!("nn: writing {}", path.display()))
    };
    save(&outcome.best, "checkpoint.vckp", outcome.best_epoch)?;
    save(&outcome.last, "last.vckp", config.train.epochs.saturating_sub(1))?;
    let metrics = args.out.join("metrics.jsonl");
    write_metrics_jsonl(&metrics, &outcome.metrics).with_context(|| format!("train: writing {}", metrics.display()))?;
    write_json(&args.out.join("config.json"), &config)?;
    eprintln!(
        "train: best epoch {} with loss {:.6}; outputs in {}",
        outcome.best_epoch,
        outcome.best_loss,
        args.out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct GeneratedTurn {
    index: u32,
    role: &'static str,
    frames: usize,
    conditioning: String,
    file: String,
}

#[derive(Serialize)]
struct GenerationReport {
    manifest: PathBuf,
    agent: &'static str,
    policy: &'static str,
    turns: Vec<GeneratedTurn>,
}

pub fn generate(args: GenerateArgs) -> Result<()> {
    let (agent, agent_name) = match args.agent {
        AgentArg::P => (Agent::P, "P"),
        AgentArg::Q => (Agent::Q, "Q"),
    };
    let (policy, policy_name) = match args.policy {
        PolicyArg::Carry => (SwitchPolicy::Carry, "carry"),
        PolicyArg::Reset => (SwitchPolicy::Reset, "reset"),
    };
    let conv =
        Conversation::load(&args.manifest).with_context(|| format!("coeffs: loading {}", args.manifest.display()))?;
    let params = load_checkpoint(&args.checkpoint, "agent")?;
    let turns = agent_turns(&conv, agent, &params.config).context("tasks: building agent turns")?;
    let outputs = generate_conversation_with(&turns, &params, policy).context("tasks: generating the conversation")?;

    create_dir(&args.out_dir)?;
    let mut report = GenerationReport {
        manifest: args.manifest.clone(),
        agent: agent_name,
        policy: policy_name,
        turns: Vec::new(),
    };
    for ((turn, input), seq) in conv.turns.iter().zip(&turns).zip(&outputs) {
        let file = format!("turn_{:02}.vcof", turn.index);
        let path = args.out_dir.join(&file);
        save_sequence(&path, seq).with_context(|| format!("coeffs: writing {}", path.display()))?;
        let vocab = match input.role {
            Role::Listener => &params.config.listener_vocabulary,
            Role::Speaker => &params.config.talker_vocabulary,
        };
        report.turns.push(GeneratedTurn {
            index: turn.index,
            role: match input.role {
                Role::Listener => "listener",
                Role::Speaker => "speaker",
            },
            frames: seq.len(),
            conditioning: format!("{}:{}", vocab.name, vocab.labels[input.conditioning]),
            file,
        });
    }
    write_json(&args.out_dir.join("report.json"), &report)?;
    eprintln!(
        "generate: {} turns for agent {agent_name} in {}",
        outputs.len(),
        args.out_dir.display()
    );
    Ok(())
}

pub fn evaluate(args: EvaluateArgs) -> Result<()> {
    let seed = match args.seed {
        Some(s) => s,
        None => env_seed()?.unwrap_or(0),
    };
    if !(args.sigma >= 0.0 && args.sigma.is_finite()) {
        return Err(usage(format!("--sigma must be non-negative, got {}", args.sigma)));
    }
    let method = match args.method.as_str() {
        "mirror" => Method::Mirror,
        "random" => Method::Random {
            sigma: args.sigma,
            seed,
        },
        "ground-truth" => Method::GroundTruth,
        other => match other.strip_prefix("ckpt:") {
            Some(path) => Method::Model(Box::new(load_checkpoint(Path::new(path), "evaluated")?)),
            None => {
                return Err(usage(format!(
                    "unknown method `{other}`, expected mirror, random, ground-truth or ckpt:<path>"
                )))
            }
        },
    };
    let target = match args.target {
        TargetArg::Listener => EvalTarget::Listener,
        TargetArg::Talker => EvalTarget::Talker,
    };
    let dataset = args.dataset.clone().unwrap_or_else(|| {
        args.manifests
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| args.manifests.display().to_string())
    });
    let conversations = load_conversations(&args.manifests)
        .with_context(|| format!("coeffs: loading conversations from {}", args.manifests.display()))?;
    if conversations.is_empty() {
        return Err(usage(format!(
            "no manifest.json found under {}",
            args.manifests.display()
        )));
    }
    let report = evaluate_run(&conversations, &method, target, &dataset).context("eval")?;
    report
        .save(&args.out)
        .with_context(|| format!("eval: writing {}", args.out.display()))?;
    eprintln!(
        "evaluate: {} on {} {:?} clips: ExpFD {:.4} AngleFD {:.4} TransFD {:.4}",
        report.method, report.clip_count, target, report.mean.exp_fd, report.mean.angle_fd, report.mean.trans_fd
    );
    Ok(())
}
